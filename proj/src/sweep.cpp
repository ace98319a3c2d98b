// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <ostream>

#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"
#include "gpart/report.hpp"
#include "gpart/rng.hpp"

namespace gpart {

std::vector<SweepRow> dim_sweep(const std::vector<std::size_t>& d_values, const SweepContext& context,
                                std::size_t repeats) {
    if (repeats == 0) {
        throw ParameterError("sweep needs repeats >= 1");
    }
    const std::size_t total = context.net.manifest().total();
    for (auto d : d_values) {
        if (d == 0 || d > total) {
            throw ParameterError("sweep value d=" + std::to_string(d) + " outside [1, N=" + std::to_string(total) + "]");
        }
    }
    std::vector<SweepRow> rows;
    for (auto d : d_values) {
        SweepRow row;
        row.d = d;
        std::vector<double> accs;
        for (std::size_t k = 0; k < repeats; ++k) {
            try {
                GPartAdapter adapter(context.net.manifest(), d, derive_seed(context.partition_seed, k));
                FinetuneOptions options = context.options;
                options.seed = derive_seed(context.options.seed, k);
                const TrainRecord record = finetune(adapter, context.net, context.w0, context.task, options);
                accs.push_back(record.epochs() == 0 ? 0.0 : record.dev_acc[record.best_epoch - 1]);
            } catch (const std::exception& e) {
                ++row.failures;
                row.errors.emplace_back(e.what());
            }
        }
        row.runs = accs.size();
        if (!accs.empty()) {
            double sum = 0.0;
            for (double a : accs) sum += a;
            row.mean_dev_acc = sum / static_cast<double>(accs.size());
            if (accs.size() > 1) {
                double ss = 0.0;
                for (double a : accs) ss += (a - row.mean_dev_acc) * (a - row.mean_dev_acc);
                row.std_dev_acc = std::sqrt(ss / static_cast<double>(accs.size() - 1));
            }
        } else {
            row.mean_dev_acc = std::nan("");
            row.std_dev_acc = std::nan("");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "d,mean_dev_acc,std_dev_acc,runs,failures\n";
    for (const auto& r : rows) {
        out << r.d << ',' << format_number(r.mean_dev_acc) << ',' << format_number(r.std_dev_acc) << ',' << r.runs
            << ',' << r.failures << '\n';
    }
}

}  // namespace gpart
