// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <string>
#include <utility>
#include <vector>

#include "gpart/adapters.hpp"
#include "gpart/partition.hpp"
#include "gpart/rng.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

// --- loss landscape --------------------------------------------------------

struct Interval {
    double lo = -0.5;
    double hi = 0.5;
};

struct LandscapeSpec {
    std::size_t grid_size = 30;
    Interval alpha;
    Interval beta;
    std::vector<std::uint64_t> direction_seeds{1, 2, 3};

    void validate() const;
};

/// Grid coordinates lo + (hi - lo) * k / grid_size for k in [0, grid_size).
/// For a symmetric interval and even grid size, index grid_size / 2 is exactly 0.
std::vector<double> grid_axis(const Interval& range, std::size_t grid_size);

struct LandscapeGrid {
    LandscapeSpec spec;
    std::vector<double> alphas;
    std::vector<double> betas;
    std::vector<double> theta_star;
    std::vector<Matrix> per_seed;  // (alpha index, beta index) -> dev loss
    Matrix mean;
    std::size_t flagged = 0;  // non-finite cells, stored as NaN

    /// Index of the exact 0 on an axis, if the axis contains one.
    static std::optional<std::size_t> zero_index(const std::vector<double>& axis);
};

/// Two seeded standard-normal directions in R^d, each rescaled to ||θ*||
/// (to 1 when θ* = 0).
std::pair<std::vector<double>, std::vector<double>> random_directions(std::uint64_t seed,
                                                                      std::span<const double> theta_star);

/// Dev loss of w0 + delta(θ* + α δ1 + β δ2) over the grid, per direction seed,
/// plus the elementwise mean. The adapter and w0 are not modified. `threads` > 1
/// evaluates cells concurrently with identical results.
LandscapeGrid loss_landscape(const Adapter& adapter, const Mlp& net, const WeightVector& w0, const TaskData& task,
                             const LandscapeSpec& spec, std::size_t threads = 1);

/// The same grid for a GPart adapter evaluated directly in weight space:
/// w* + α P δ1 + β P δ2 with w* = w0 + P θ*.
LandscapeGrid weight_space_landscape(const GPartAdapter& adapter, const Mlp& net, const WeightVector& w0,
                                     const TaskData& task, const LandscapeSpec& spec);

/// Header `seed,alpha,beta,loss`; one block per direction seed, then a `mean` block.
void write_landscape_csv(const LandscapeGrid& grid, std::ostream& out);

// --- LoRA structure --------------------------------------------------------

inline constexpr std::size_t kDenseRankLimit = 4;
inline constexpr std::size_t kDenseDimLimit = 16;

struct JacobianBlocks {
    Matrix wrt_a;  // mn x rn, I_n ⊗ B
    Matrix wrt_b;  // mn x mr, Aᵀ ⊗ I_m
};

/// Dense Jacobians of vec(BA). Refuses r > 4 or m, n > 16.
JacobianBlocks lora_jacobian_blocks(const Matrix& a, const Matrix& b);

Matrix kronecker(const Matrix& x, const Matrix& y);

/// (B G⁻¹, G A).
std::pair<Matrix, Matrix> gauge_transform(const Matrix& b, const Matrix& a, const Matrix& g);
/// (λ B, A / λ).
std::pair<Matrix, Matrix> scale_transform(const Matrix& b, const Matrix& a, double lambda);

struct SymmetryCheck {
    std::string name;
    std::uint64_t seed = 0;
    double value = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct SymmetryReport {
    std::vector<SymmetryCheck> checks;
    bool all_passed() const;
};

/// Per seed: a random G with condition number <= 100 (redrawn otherwise) and
/// λ in {0.1, 10} must leave BA unchanged to 1e-10 relative; a GPart partition
/// over the m*n entries must keep distinct θ at distance >= (1 - 1e-12)||θ - θ'||.
SymmetryReport symmetry_suite(const Matrix& a, const Matrix& b, const std::vector<std::uint64_t>& seeds);

/// Draws an r x r Gaussian matrix, redrawing until its condition number is <= max_condition.
Matrix random_invertible(std::size_t r, SplitMix64& rng, double max_condition = 100.0);

// --- distortion ------------------------------------------------------------

enum class MapKind { GPartIsometric, GPartNonIsometric, LoRA, UniLoRA };

std::string_view to_string(MapKind kind);

/// Shapes and partition settings for a distortion probe.
struct DistortionContext {
    ModelManifest manifest;
    std::size_t dim = 1;   // GPart / Uni-LoRA subspace dimension
    std::size_t rank = 1;  // LoRA / Uni-LoRA rank
    std::uint64_t partition_seed = 0;
};

struct DistortionReport {
    std::vector<double> ratios;
    double min = 0.0;
    double max = 0.0;
    double spread = 0.0;  // max / min
};

/// Ratios ||f(x) - f(y)|| / ||x - y|| for `num_pairs` seeded standard-normal
/// coordinate pairs, where f is the end-to-end map into weight space.
DistortionReport distortion_probe(MapKind kind, const DistortionContext& context, std::size_t num_pairs,
                                  std::uint64_t seed);

void write_distortion_csv(const DistortionReport& report, MapKind kind, std::ostream& out);

// --- weight decay ----------------------------------------------------------

struct WeightDecayAudit {
    double theta_sq = 0.0;
    double delta_sq = 0.0;
    double ratio = 1.0;  // delta_sq / theta_sq; 1 when θ = 0
};

WeightDecayAudit weight_decay_audit(const GPartAdapter& adapter);

// --- d sweep ---------------------------------------------------------------

struct SweepContext {
    Mlp net;
    WeightVector w0;
    TaskData task;
    FinetuneOptions options;
    std::uint64_t partition_seed = 0;
};

struct SweepRow {
    std::size_t d = 0;
    double mean_dev_acc = 0.0;
    double std_dev_acc = 0.0;
    std::size_t runs = 0;
    std::size_t failures = 0;
    std::vector<std::string> errors;
};

/// Fine-tunes an isometric GPart adapter for every (d, repeat) and aggregates
/// the selected-checkpoint dev accuracy. Repeat k uses partition seed
/// derive_seed(partition_seed, k) and training seed derive_seed(options.seed, k).
/// A failing cell is counted and the sweep continues.
std::vector<SweepRow> dim_sweep(const std::vector<std::size_t>& d_values, const SweepContext& context,
                                std::size_t repeats);

/// Header `d,mean_dev_acc,std_dev_acc,runs,failures`.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace gpart
