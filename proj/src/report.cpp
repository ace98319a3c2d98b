// SPDX-License-Identifier: Apache-2.0
#include "gpart/report.hpp"

#include <ostream>

#include <fmt/format.h>

namespace gpart {

std::string format_number(double value) { return fmt::format("{:.10g}", value); }

void write_train_record_csv(const TrainRecord& record, std::ostream& out) {
    out << "epoch,train_loss,dev_loss,dev_acc\n";
    for (std::size_t e = 0; e < record.epochs(); ++e) {
        out << (e + 1) << ',' << format_number(record.train_loss[e]) << ',' << format_number(record.dev_loss[e])
            << ',' << format_number(record.dev_acc[e]) << '\n';
    }
}

void write_vector_csv(std::span<const double> values, std::ostream& out) {
    for (double v : values) {
        out << fmt::format("{:.17g}", v) << '\n';
    }
}

}  // namespace gpart
