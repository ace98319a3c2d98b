// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>

#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"
#include "gpart/report.hpp"
#include "gpart/rng.hpp"

namespace gpart {

std::string_view to_string(MapKind kind) {
    switch (kind) {
    case MapKind::GPartIsometric:
        return "gpart_iso";
    case MapKind::GPartNonIsometric:
        return "gpart_noniso";
    case MapKind::LoRA:
        return "lora";
    case MapKind::UniLoRA:
        return "unilora";
    }
    return "unknown";
}

DistortionReport distortion_probe(MapKind kind, const DistortionContext& context, std::size_t num_pairs,
                                  std::uint64_t seed) {
    if (num_pairs < 10) {
        throw ParameterError("distortion probe needs at least 10 pairs");
    }
    const ModelManifest& manifest = context.manifest;
    std::size_t input_dim = 0;
    std::function<WeightVector(std::span<const double>)> map;

    switch (kind) {
    case MapKind::GPartIsometric:
    case MapKind::GPartNonIsometric: {
        auto pm = std::make_shared<PartitionMap>(build_partition(context.partition_seed, manifest.total(), context.dim));
        input_dim = context.dim;
        if (kind == MapKind::GPartIsometric) {
            map = [pm](std::span<const double> x) { return project(*pm, x); };
        } else {
            map = [pm](std::span<const double> x) { return project_unscaled(*pm, x); };
        }
        break;
    }
    case MapKind::LoRA: {
        auto factors = std::make_shared<ModelManifest>(lora_factor_manifest(manifest, context.rank));
        input_dim = factors->total();
        map = [factors, &manifest](std::span<const double> x) { return lora_delta(x, manifest, *factors); };
        break;
    }
    case MapKind::UniLoRA: {
        auto factors = std::make_shared<ModelManifest>(lora_factor_manifest(manifest, context.rank));
        auto pm = std::make_shared<PartitionMap>(build_partition(context.partition_seed, factors->total(), context.dim));
        input_dim = context.dim;
        map = [factors, pm, &manifest](std::span<const double> x) {
            const WeightVector f = project(*pm, x);
            return lora_delta(f.span(), manifest, *factors);
        };
        break;
    }
    }

    SplitMix64 rng(seed);
    DistortionReport report;
    report.ratios.reserve(num_pairs);
    std::vector<double> x(input_dim);
    std::vector<double> y(input_dim);
    while (report.ratios.size() < num_pairs) {
        double dist_sq = 0.0;
        for (std::size_t k = 0; k < input_dim; ++k) {
            x[k] = rng.normal();
            y[k] = rng.normal();
            dist_sq += (x[k] - y[k]) * (x[k] - y[k]);
        }
        if (dist_sq == 0.0) {
            continue;
        }
        const WeightVector fx = map(x);
        const WeightVector fy = map(y);
        double image_sq = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) {
            image_sq += (fx[i] - fy[i]) * (fx[i] - fy[i]);
        }
        report.ratios.push_back(std::sqrt(image_sq) / std::sqrt(dist_sq));
    }
    const auto [lo, hi] = std::minmax_element(report.ratios.begin(), report.ratios.end());
    report.min = *lo;
    report.max = *hi;
    report.spread = report.max / report.min;
    return report;
}

void write_distortion_csv(const DistortionReport& report, MapKind kind, std::ostream& out) {
    out << "map,pair,ratio\n";
    for (std::size_t i = 0; i < report.ratios.size(); ++i) {
        out << to_string(kind) << ',' << i << ',' << format_number(report.ratios[i]) << '\n';
    }
}

}  // namespace gpart
