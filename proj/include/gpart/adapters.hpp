// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpart/partition.hpp"
#include "gpart/weightspace.hpp"

namespace gpart {

enum class AdapterKind { GPartIsometric, GPartNonIsometric, LoRA, UniLoRA, FullFT };

std::string_view to_string(AdapterKind kind);
/// Accepts `gpart`, `gpart_noniso`, `lora`, `unilora`, `fullft`.
AdapterKind parse_adapter_kind(std::string_view name);

/// A parameterization of the weight-space update Δw by a flat vector of
/// trainable coordinates.
///
/// `delta_at` and `pullback_at` are pure functions of the coordinates they are
/// given, which lets callers evaluate perturbed states (landscapes, finite
/// differences) without touching the adapter. The convenience overloads use
/// the adapter's own coordinates.
class Adapter {
public:
    virtual ~Adapter() = default;

    virtual AdapterKind kind() const = 0;
    virtual std::unique_ptr<Adapter> clone() const = 0;

    /// Δw for coordinates `p`.
    virtual WeightVector delta_at(std::span<const double> p) const = 0;
    /// Gradient with respect to the coordinates, given ∇_w L evaluated at w0 + delta_at(p).
    virtual std::vector<double> pullback_at(std::span<const double> p, std::span<const double> grad_w) const = 0;

    WeightVector delta() const { return delta_at(params_); }
    std::vector<double> pullback_grad(const WeightVector& grad_w) const { return pullback_at(params_, grad_w.span()); }

    const ModelManifest& manifest() const { return manifest_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    void set_params(std::span<const double> p);

    /// GPart and Uni-LoRA: d. LoRA: sum of r(m+n). FullFT: N.
    std::size_t count_trainable() const { return params_.size(); }

protected:
    Adapter(ModelManifest manifest, std::vector<double> params)
        : manifest_(std::move(manifest)), params_(std::move(params)) {}
    Adapter(const Adapter&) = default;
    Adapter& operator=(const Adapter&) = default;

    void check_grad_length(std::size_t n) const;
    void check_param_length(std::size_t n) const;

    ModelManifest manifest_;
    std::vector<double> params_;
};

/// w0 + delta(adapter). w0 is not modified.
WeightVector merge(const Adapter& adapter, const WeightVector& w0);

/// Δw = P θ with θ initialized to zero.
class GPartAdapter final : public Adapter {
public:
    GPartAdapter(ModelManifest manifest, std::size_t dim, std::uint64_t seed, bool isometric = true);
    GPartAdapter(ModelManifest manifest, PartitionMap pm, ThetaVector theta, bool isometric);

    AdapterKind kind() const override {
        return isometric_ ? AdapterKind::GPartIsometric : AdapterKind::GPartNonIsometric;
    }
    std::unique_ptr<Adapter> clone() const override { return std::make_unique<GPartAdapter>(*this); }
    WeightVector delta_at(std::span<const double> p) const override;
    std::vector<double> pullback_at(std::span<const double> p, std::span<const double> grad_w) const override;

    bool isometric() const { return isometric_; }
    const PartitionMap& partition() const { return pm_; }
    ThetaVector theta() const { return ThetaVector(params_); }

private:
    PartitionMap pm_;
    bool isometric_;
};

/// Layout of the LoRA factor space: layers B_0 (m_0 x r), A_0 (r x n_0), B_1, A_1, ...
/// so its flat vector is Concat(vec B_0, vec A_0, ...). Total D = sum r(m+n).
ModelManifest lora_factor_manifest(const ModelManifest& manifest, std::size_t rank);

/// Per-layer ΔW_l = B_l A_l, no α/r scaling. B starts at zero, A ~ N(0, 0.02²).
class LoRAAdapter final : public Adapter {
public:
    LoRAAdapter(ModelManifest manifest, std::size_t rank, std::uint64_t init_seed);

    AdapterKind kind() const override { return AdapterKind::LoRA; }
    std::unique_ptr<Adapter> clone() const override { return std::make_unique<LoRAAdapter>(*this); }
    WeightVector delta_at(std::span<const double> p) const override;
    std::vector<double> pullback_at(std::span<const double> p, std::span<const double> grad_w) const override;

    std::size_t rank() const { return rank_; }
    const ModelManifest& factor_manifest() const { return factors_; }
    Eigen::Map<Matrix> factor_b(std::size_t layer);
    Eigen::Map<Matrix> factor_a(std::size_t layer);

    static constexpr double kInitStd = 0.02;

private:
    std::size_t rank_;
    ModelManifest factors_;
};

/// θ (length d) -> isometric partition into the LoRA factor space -> per-layer BA.
/// θ starts at small seeded Gaussian noise (std 1e-3); at θ = 0 every factor
/// gradient vanishes.
class UniLoRAAdapter final : public Adapter {
public:
    UniLoRAAdapter(ModelManifest manifest, std::size_t rank, std::size_t dim, std::uint64_t partition_seed,
                   std::uint64_t init_seed);

    AdapterKind kind() const override { return AdapterKind::UniLoRA; }
    std::unique_ptr<Adapter> clone() const override { return std::make_unique<UniLoRAAdapter>(*this); }
    WeightVector delta_at(std::span<const double> p) const override;
    std::vector<double> pullback_at(std::span<const double> p, std::span<const double> grad_w) const override;

    std::size_t rank() const { return rank_; }
    std::size_t factor_total() const { return factors_.total(); }
    const PartitionMap& factor_partition() const { return factor_pm_; }
    const ModelManifest& factor_manifest() const { return factors_; }

    static constexpr double kInitStd = 1e-3;

private:
    std::size_t rank_;
    ModelManifest factors_;
    PartitionMap factor_pm_;
};

/// Δw is the trainable vector itself (the d = N reference point).
class FullFTAdapter final : public Adapter {
public:
    explicit FullFTAdapter(ModelManifest manifest);

    AdapterKind kind() const override { return AdapterKind::FullFT; }
    std::unique_ptr<Adapter> clone() const override { return std::make_unique<FullFTAdapter>(*this); }
    WeightVector delta_at(std::span<const double> p) const override;
    std::vector<double> pullback_at(std::span<const double> p, std::span<const double> grad_w) const override;
};

/// Flattened ΔW = BA through factor-space coordinates laid out by `factors`.
WeightVector lora_delta(std::span<const double> factor_params, const ModelManifest& manifest,
                        const ModelManifest& factors);
/// (grad_B = G Aᵀ, grad_A = Bᵀ G) per layer, flattened in factor-space order.
std::vector<double> lora_factor_grad(std::span<const double> factor_params, std::span<const double> grad_w,
                                     const ModelManifest& manifest, const ModelManifest& factors);

// Checkpoint file, little-endian:
//   "GPRT" | u32 version=1 | u8 mode (0 iso, 1 noniso) | 7 zero bytes |
//   u64 seed | u64 dim | u64 total | dim x f64 theta
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 40;

struct CheckpointData {
    bool isometric = true;
    std::uint64_t seed = 0;
    std::uint64_t total = 0;
    std::vector<double> theta;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
/// Throws FormatError (with byte offset) on any malformed input.
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const GPartAdapter& adapter, const std::filesystem::path& path);
void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path);
CheckpointData read_checkpoint(const std::filesystem::path& path);
/// Regenerates the partition from (seed, N, d). Throws CompatibilityError when
/// the stored N differs from the manifest total.
GPartAdapter load_checkpoint(const std::filesystem::path& path, const ModelManifest& manifest);

}  // namespace gpart
