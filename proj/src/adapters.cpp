// SPDX-License-Identifier: Apache-2.0
#include "gpart/adapters.hpp"

#include <string>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"

namespace gpart {

std::string_view to_string(AdapterKind kind) {
    switch (kind) {
    case AdapterKind::GPartIsometric:
        return "gpart";
    case AdapterKind::GPartNonIsometric:
        return "gpart_noniso";
    case AdapterKind::LoRA:
        return "lora";
    case AdapterKind::UniLoRA:
        return "unilora";
    case AdapterKind::FullFT:
        return "fullft";
    }
    return "unknown";
}

AdapterKind parse_adapter_kind(std::string_view name) {
    for (auto k : {AdapterKind::GPartIsometric, AdapterKind::GPartNonIsometric, AdapterKind::LoRA,
                   AdapterKind::UniLoRA, AdapterKind::FullFT}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ParameterError("unknown adapter kind '" + std::string(name) + "'");
}

void Adapter::set_params(std::span<const double> p) {
    check_param_length(p.size());
    std::copy(p.begin(), p.end(), params_.begin());
}

void Adapter::check_grad_length(std::size_t n) const {
    if (n != manifest_.total()) {
        throw ManifestError(std::string(to_string(kind())) + ": gradient length " + std::to_string(n) +
                            " != manifest total " + std::to_string(manifest_.total()));
    }
}

void Adapter::check_param_length(std::size_t n) const {
    if (n != params_.size()) {
        throw ManifestError(std::string(to_string(kind())) + ": coordinate length " + std::to_string(n) +
                            " != trainable count " + std::to_string(params_.size()));
    }
}

WeightVector merge(const Adapter& adapter, const WeightVector& w0) {
    if (w0.size() != adapter.manifest().total()) {
        throw ManifestError("merge: w0 length " + std::to_string(w0.size()) + " != manifest total " +
                            std::to_string(adapter.manifest().total()));
    }
    WeightVector w = adapter.delta();
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = w0[i] + w[i];
    }
    return w;
}

// --- GPart -----------------------------------------------------------------

GPartAdapter::GPartAdapter(ModelManifest manifest, std::size_t dim, std::uint64_t seed, bool isometric)
    : Adapter(std::move(manifest), std::vector<double>(dim, 0.0)),
      pm_(build_partition(seed, manifest_.total(), dim)),
      isometric_(isometric) {}

GPartAdapter::GPartAdapter(ModelManifest manifest, PartitionMap pm, ThetaVector theta, bool isometric)
    : Adapter(std::move(manifest), std::move(theta.values)), pm_(std::move(pm)), isometric_(isometric) {
    if (pm_.total() != manifest_.total()) {
        throw CompatibilityError("partition covers N=" + std::to_string(pm_.total()) + ", manifest has N=" +
                                 std::to_string(manifest_.total()));
    }
    check_param_length(pm_.dim());
}

WeightVector GPartAdapter::delta_at(std::span<const double> p) const {
    check_param_length(p.size());
    return isometric_ ? project(pm_, p) : project_unscaled(pm_, p);
}

std::vector<double> GPartAdapter::pullback_at(std::span<const double> p, std::span<const double> grad_w) const {
    check_param_length(p.size());
    check_grad_length(grad_w.size());
    return (isometric_ ? pullback(pm_, grad_w) : pullback_unscaled(pm_, grad_w)).values;
}

// --- LoRA ------------------------------------------------------------------

ModelManifest lora_factor_manifest(const ModelManifest& manifest, std::size_t rank) {
    if (rank == 0) {
        throw ParameterError("LoRA rank must be >= 1");
    }
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::vector<std::string> names;
    for (const auto& l : manifest.layers()) {
        shapes.emplace_back(l.rows, rank);
        names.push_back(l.name + ".B");
        shapes.emplace_back(rank, l.cols);
        names.push_back(l.name + ".A");
    }
    return build_manifest(shapes, names);
}

WeightVector lora_delta(std::span<const double> factor_params, const ModelManifest& manifest,
                        const ModelManifest& factors) {
    WeightVector out(manifest.total());
    for (std::size_t l = 0; l < manifest.layer_count(); ++l) {
        const auto b = layer_view(factor_params, factors.layer(2 * l));
        const auto a = layer_view(factor_params, factors.layer(2 * l + 1));
        layer_view(out.span(), manifest.layer(l)).noalias() = b * a;
    }
    return out;
}

std::vector<double> lora_factor_grad(std::span<const double> factor_params, std::span<const double> grad_w,
                                     const ModelManifest& manifest, const ModelManifest& factors) {
    std::vector<double> out(factors.total());
    for (std::size_t l = 0; l < manifest.layer_count(); ++l) {
        const auto& lb = factors.layer(2 * l);
        const auto& la = factors.layer(2 * l + 1);
        const auto b = layer_view(factor_params, lb);
        const auto a = layer_view(factor_params, la);
        const auto g = layer_view(grad_w, manifest.layer(l));
        layer_view(std::span<double>(out), lb).noalias() = g * a.transpose();
        layer_view(std::span<double>(out), la).noalias() = b.transpose() * g;
    }
    return out;
}

LoRAAdapter::LoRAAdapter(ModelManifest manifest, std::size_t rank, std::uint64_t init_seed)
    : Adapter(std::move(manifest), {}), rank_(rank), factors_(lora_factor_manifest(manifest_, rank)) {
    params_.assign(factors_.total(), 0.0);
    SplitMix64 rng(init_seed);
    for (std::size_t l = 0; l < manifest_.layer_count(); ++l) {
        const auto& la = factors_.layer(2 * l + 1);
        for (std::size_t k = 0; k < la.size(); ++k) {
            params_[la.offset + k] = kInitStd * rng.normal();
        }
    }
}

Eigen::Map<Matrix> LoRAAdapter::factor_b(std::size_t layer) {
    return layer_view(std::span<double>(params_), factors_.layer(2 * layer));
}

Eigen::Map<Matrix> LoRAAdapter::factor_a(std::size_t layer) {
    return layer_view(std::span<double>(params_), factors_.layer(2 * layer + 1));
}

WeightVector LoRAAdapter::delta_at(std::span<const double> p) const {
    check_param_length(p.size());
    return lora_delta(p, manifest_, factors_);
}

std::vector<double> LoRAAdapter::pullback_at(std::span<const double> p, std::span<const double> grad_w) const {
    check_param_length(p.size());
    check_grad_length(grad_w.size());
    return lora_factor_grad(p, grad_w, manifest_, factors_);
}

// --- Uni-LoRA --------------------------------------------------------------

UniLoRAAdapter::UniLoRAAdapter(ModelManifest manifest, std::size_t rank, std::size_t dim,
                               std::uint64_t partition_seed, std::uint64_t init_seed)
    : Adapter(std::move(manifest), {}),
      rank_(rank),
      factors_(lora_factor_manifest(manifest_, rank)),
      factor_pm_(build_partition(partition_seed, factors_.total(), dim)) {
    params_.resize(dim);
    SplitMix64 rng(init_seed);
    for (auto& v : params_) {
        v = kInitStd * rng.normal();
    }
}

WeightVector UniLoRAAdapter::delta_at(std::span<const double> p) const {
    check_param_length(p.size());
    const WeightVector factor_params = project(factor_pm_, p);
    return lora_delta(factor_params.span(), manifest_, factors_);
}

std::vector<double> UniLoRAAdapter::pullback_at(std::span<const double> p, std::span<const double> grad_w) const {
    check_param_length(p.size());
    check_grad_length(grad_w.size());
    const WeightVector factor_params = project(factor_pm_, p);
    const auto factor_grad = lora_factor_grad(factor_params.span(), grad_w, manifest_, factors_);
    return pullback(factor_pm_, factor_grad).values;
}

// --- FullFT ----------------------------------------------------------------

FullFTAdapter::FullFTAdapter(ModelManifest manifest) : Adapter(std::move(manifest), {}) {
    params_.assign(manifest_.total(), 0.0);
}

WeightVector FullFTAdapter::delta_at(std::span<const double> p) const {
    check_param_length(p.size());
    return WeightVector(std::vector<double>(p.begin(), p.end()));
}

std::vector<double> FullFTAdapter::pullback_at(std::span<const double> p, std::span<const double> grad_w) const {
    check_param_length(p.size());
    check_grad_length(grad_w.size());
    return {grad_w.begin(), grad_w.end()};
}

}  // namespace gpart
