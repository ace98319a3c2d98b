// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

void NetworkConfig::validate() const {
    if (layer_dims.size() < 2) {
        throw ParameterError("network needs at least input and output dims");
    }
    for (auto d : layer_dims) {
        if (d == 0) {
            throw ParameterError("network dims must be >= 1");
        }
    }
}

ModelManifest mlp_manifest(const NetworkConfig& config, bool include_head) {
    config.validate();
    const std::size_t layers = config.layer_count();
    if (!include_head && layers < 2) {
        throw ParameterError("excluding the head leaves no adapted layers");
    }
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::vector<std::string> names;
    const std::size_t count = include_head ? layers : layers - 1;
    for (std::size_t l = 0; l < count; ++l) {
        shapes.emplace_back(config.layer_dims[l + 1], config.layer_dims[l]);
        names.push_back(l + 1 == layers ? "head" : "fc" + std::to_string(l));
    }
    return build_manifest(shapes, names);
}

Mlp::Mlp(NetworkConfig config) : config_(std::move(config)), manifest_(mlp_manifest(config_, true)) {}

Mlp::Mlp(NetworkConfig config, Matrix head)
    : config_(std::move(config)), manifest_(mlp_manifest(config_, false)), frozen_head_(std::move(head)) {
    const auto n = config_.layer_dims.size();
    if (static_cast<std::size_t>(frozen_head_->rows()) != config_.layer_dims[n - 1] ||
        static_cast<std::size_t>(frozen_head_->cols()) != config_.layer_dims[n - 2]) {
        throw ManifestError("frozen head shape does not match network dims");
    }
}

WeightVector init_weights(const NetworkConfig& config, std::uint64_t seed) {
    const auto manifest = mlp_manifest(config, true);
    WeightVector w(manifest.total());
    SplitMix64 rng(seed);
    for (const auto& l : manifest.layers()) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.cols));
        for (std::size_t k = 0; k < l.size(); ++k) {
            w[l.offset + k] = scale * rng.normal();
        }
    }
    return w;
}

namespace {

struct Forward {
    std::vector<Matrix> activations;  // a_0 = inputs, a_l = tanh(W_l a_{l-1}) for hidden layers
    Matrix probs;                     // classes x batch
    double loss = 0.0;
    double accuracy = 0.0;
};

Matrix gather(const TaskData& data, std::span<const std::size_t> batch) {
    Matrix x(data.inputs.cols(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        x.col(static_cast<Eigen::Index>(b)) = data.inputs.row(static_cast<Eigen::Index>(batch[b])).transpose();
    }
    return x;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw NumericError(std::string("non-finite values in ") + what);
    }
}

template <typename WeightAt>
Forward forward(const Mlp& net, WeightAt&& weight, const TaskData& data, std::span<const std::size_t> batch) {
    if (batch.empty()) {
        throw ParameterError("loss needs a non-empty batch");
    }
    const std::size_t layers = net.config().layer_count();
    Forward f;
    f.activations.reserve(layers);
    f.activations.push_back(gather(data, batch));
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        Matrix z = weight(l) * f.activations.back();
        f.activations.push_back(z.array().tanh().matrix());
        require_finite(f.activations.back(), "hidden activations");
    }
    Matrix logits = weight(layers - 1) * f.activations.back();
    require_finite(logits, "logits");

    const auto bsz = static_cast<Eigen::Index>(batch.size());
    f.probs.resize(logits.rows(), bsz);
    double total = 0.0;
    std::size_t correct = 0;
    for (Eigen::Index b = 0; b < bsz; ++b) {
        Eigen::Index argmax = 0;
        const double peak = logits.col(b).maxCoeff(&argmax);
        const Eigen::VectorXd shifted = (logits.col(b).array() - peak).matrix();
        const double sum = shifted.array().exp().sum();
        f.probs.col(b) = (shifted.array().exp() / sum).matrix();
        const int y = data.labels[batch[static_cast<std::size_t>(b)]];
        total += std::log(sum) - shifted(y);
        correct += argmax == y ? 1 : 0;
    }
    f.loss = total / static_cast<double>(bsz);
    f.accuracy = static_cast<double>(correct) / static_cast<double>(bsz);
    if (!std::isfinite(f.loss)) {
        throw NumericError("non-finite loss");
    }
    return f;
}

void check_weights(const Mlp& net, std::span<const double> w) {
    if (w.size() != net.manifest().total()) {
        throw ManifestError("weight vector length " + std::to_string(w.size()) + " != manifest total " +
                            std::to_string(net.manifest().total()));
    }
}

}  // namespace

LossGrad loss_and_grad(const Mlp& net, std::span<const double> w, const TaskData& data,
                       std::span<const std::size_t> batch) {
    check_weights(net, w);
    const auto& manifest = net.manifest();
    auto weight = [&](std::size_t l) -> Matrix {
        if (l < manifest.layer_count()) {
            return layer_view(w, manifest.layer(l));
        }
        return net.frozen_head();
    };
    Forward f = forward(net, weight, data, batch);

    LossGrad out{f.loss, WeightVector(manifest.total())};
    const std::size_t layers = net.config().layer_count();
    Matrix delta = f.probs;  // dL/dlogits
    for (std::size_t b = 0; b < batch.size(); ++b) {
        delta(data.labels[batch[b]], static_cast<Eigen::Index>(b)) -= 1.0;
    }
    delta /= static_cast<double>(batch.size());

    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& input = f.activations[l];
        if (l < manifest.layer_count()) {
            layer_view(out.grad.span(), manifest.layer(l)).noalias() = delta * input.transpose();
        }
        if (l == 0) {
            break;
        }
        Matrix back = weight(l).transpose() * delta;
        delta = (back.array() * (1.0 - input.array().square())).matrix();
    }
    return out;
}

Evaluation evaluate(const Mlp& net, std::span<const double> w, const TaskData& data,
                    std::span<const std::size_t> batch) {
    check_weights(net, w);
    const auto& manifest = net.manifest();
    auto weight = [&](std::size_t l) -> Matrix {
        if (l < manifest.layer_count()) {
            return layer_view(w, manifest.layer(l));
        }
        return net.frozen_head();
    };
    const Forward f = forward(net, weight, data, batch);
    return {f.loss, f.accuracy};
}

}  // namespace gpart
