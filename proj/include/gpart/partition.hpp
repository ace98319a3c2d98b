// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gpart/weightspace.hpp"

namespace gpart {

/// Trainable coordinates of a subspace adapter.
struct ThetaVector {
    std::vector<double> values;

    ThetaVector() = default;
    explicit ThetaVector(std::size_t d, double fill = 0.0) : values(d, fill) {}
    explicit ThetaVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }

    bool operator==(const ThetaVector&) const = default;
};

/// Seed-determined global assignment g: [0, N) -> [0, d) and its group sizes.
///
/// Together these define the implicit N x d partition matrix with entries
/// P(i, g(i)) = 1/sqrt(n_g(i)) and zeros elsewhere. Columns have disjoint
/// support and unit norm, so P^T P = I. The matrix is never formed outside
/// `materialize`.
class PartitionMap {
public:
    std::uint64_t seed() const { return seed_; }
    std::size_t total() const { return assignment_.size(); }
    std::size_t dim() const { return group_sizes_.size(); }

    std::span<const std::uint32_t> assignment() const { return assignment_; }
    std::span<const std::uint32_t> group_sizes() const { return group_sizes_; }
    std::span<const double> sqrt_sizes() const { return sqrt_; }

    bool operator==(const PartitionMap&) const = default;

private:
    friend PartitionMap build_partition(std::uint64_t, std::size_t, std::size_t);

    std::uint64_t seed_ = 0;
    std::vector<std::uint32_t> assignment_;
    std::vector<std::uint32_t> group_sizes_;
    std::vector<double> sqrt_;
};

/// Fisher-Yates shuffle of [0, N) from a splitmix64 stream seeded with `seed`,
/// then a contiguous split into d chunks: the first N mod d chunks get
/// ceil(N/d) entries, the rest floor(N/d). Requires 1 <= d <= N < 2^32.
PartitionMap build_partition(std::uint64_t seed, std::size_t total, std::size_t dim);

/// delta_w[i] = theta[g(i)] / sqrt(n_g(i)), one pass over N.
WeightVector project(const PartitionMap& pm, std::span<const double> theta);
/// result[j] = sum_{g(i)=j} v[i] / sqrt(n_j).
ThetaVector pullback(const PartitionMap& pm, std::span<const double> v);

/// Unscaled variants: P_ij = 1 when g(i) = j. P^T P = diag(n_j).
WeightVector project_unscaled(const PartitionMap& pm, std::span<const double> theta);
ThetaVector pullback_unscaled(const PartitionMap& pm, std::span<const double> v);

/// Dense N x d copy of P for oracles. Refuses when N*d exceeds `kMaterializeLimit`.
inline constexpr std::size_t kMaterializeLimit = 10'000'000;
Matrix materialize(const PartitionMap& pm);

}  // namespace gpart
