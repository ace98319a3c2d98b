// SPDX-License-Identifier: Apache-2.0
#include "gpart/partition.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"

namespace gpart {

PartitionMap build_partition(std::uint64_t seed, std::size_t total, std::size_t dim) {
    if (dim == 0 || dim > total) {
        throw ParameterError("partition needs 1 <= d <= N, got d=" + std::to_string(dim) +
                             " N=" + std::to_string(total));
    }
    if (total > std::numeric_limits<std::uint32_t>::max()) {
        throw ParameterError("partition supports N < 2^32");
    }

    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    SplitMix64 rng(seed);
    fisher_yates(std::span<std::uint32_t>(order), rng);

    PartitionMap pm;
    pm.seed_ = seed;
    pm.assignment_.resize(total);
    pm.group_sizes_.resize(dim);
    pm.sqrt_.resize(dim);

    const std::size_t base = total / dim;
    const std::size_t larger = total % dim;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < dim; ++g) {
        const std::size_t size = base + (g < larger ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) {
            pm.assignment_[order[pos++]] = static_cast<std::uint32_t>(g);
        }
        pm.group_sizes_[g] = static_cast<std::uint32_t>(size);
        pm.sqrt_[g] = std::sqrt(static_cast<double>(size));
    }
    return pm;
}

namespace {

void check_theta(const PartitionMap& pm, std::size_t n) {
    if (n != pm.dim()) {
        throw ManifestError("theta length " + std::to_string(n) + " != partition dim " + std::to_string(pm.dim()));
    }
}

void check_weights(const PartitionMap& pm, std::size_t n) {
    if (n != pm.total()) {
        throw ManifestError("weight-space vector length " + std::to_string(n) + " != partition total " +
                            std::to_string(pm.total()));
    }
}

}  // namespace

WeightVector project(const PartitionMap& pm, std::span<const double> theta) {
    check_theta(pm, theta.size());
    const auto g = pm.assignment();
    const auto root = pm.sqrt_sizes();
    WeightVector out(pm.total());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = theta[g[i]] / root[g[i]];
    }
    return out;
}

ThetaVector pullback(const PartitionMap& pm, std::span<const double> v) {
    ThetaVector out = pullback_unscaled(pm, v);
    const auto root = pm.sqrt_sizes();
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] /= root[j];
    }
    return out;
}

WeightVector project_unscaled(const PartitionMap& pm, std::span<const double> theta) {
    check_theta(pm, theta.size());
    const auto g = pm.assignment();
    WeightVector out(pm.total());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = theta[g[i]];
    }
    return out;
}

ThetaVector pullback_unscaled(const PartitionMap& pm, std::span<const double> v) {
    check_weights(pm, v.size());
    const auto g = pm.assignment();
    ThetaVector out(pm.dim());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[g[i]] += v[i];
    }
    return out;
}

Matrix materialize(const PartitionMap& pm) {
    if (pm.total() * pm.dim() > kMaterializeLimit) {
        throw ParameterError("materialize: N*d = " + std::to_string(pm.total() * pm.dim()) +
                             " exceeds the dense-oracle limit");
    }
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(pm.total()), static_cast<Eigen::Index>(pm.dim()));
    const auto g = pm.assignment();
    for (std::size_t i = 0; i < g.size(); ++i) {
        p(static_cast<Eigen::Index>(i), g[i]) = 1.0 / pm.sqrt_sizes()[g[i]];
    }
    return p;
}

}  // namespace gpart
