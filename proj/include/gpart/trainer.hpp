// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

#include "gpart/adapters.hpp"
#include "gpart/weightspace.hpp"

namespace gpart {

// --- network ---------------------------------------------------------------

/// Bias-free tanh MLP with a linear softmax head: dims = (input, hidden..., classes).
struct NetworkConfig {
    std::vector<std::size_t> layer_dims;

    void validate() const;
    std::size_t features() const { return layer_dims.front(); }
    std::size_t classes() const { return layer_dims.back(); }
    std::size_t layer_count() const { return layer_dims.size() - 1; }
};

/// Layer l maps dims[l] -> dims[l+1], so W_l is dims[l+1] x dims[l].
/// Names are fc0, fc1, ..., and `head` for the last layer.
ModelManifest mlp_manifest(const NetworkConfig& config, bool include_head = true);

/// Network structure plus any weights that are not part of the adapted space.
class Mlp {
public:
    /// Every layer, head included, is adapted.
    explicit Mlp(NetworkConfig config);
    /// The head is frozen at `head` and excluded from the manifest.
    Mlp(NetworkConfig config, Matrix head);

    const NetworkConfig& config() const { return config_; }
    const ModelManifest& manifest() const { return manifest_; }
    bool head_adapted() const { return !frozen_head_.has_value(); }
    const Matrix& frozen_head() const { return *frozen_head_; }

private:
    NetworkConfig config_;
    ModelManifest manifest_;
    std::optional<Matrix> frozen_head_;
};

/// LeCun-normal initialization of every layer (head included), seeded.
WeightVector init_weights(const NetworkConfig& config, std::uint64_t seed);

// --- data ------------------------------------------------------------------

struct TaskData {
    Matrix inputs;  // samples x features
    std::vector<int> labels;
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
    std::size_t classes = 0;

    std::size_t samples() const { return labels.size(); }
    void validate() const;
};

struct TaskSpec {
    std::uint64_t seed = 0;
    std::size_t samples = 1000;
    std::size_t features = 16;
    std::size_t classes = 4;
    double shift_angle = 0.0;  // radians
    double cluster_std = 1.0;
    double mean_radius = 3.5;
    double min_separation = 4.0;  // pairwise mean distance, in units of cluster_std
    double dev_fraction = 0.2;
};

/// Gaussian class clusters (pretraining task) and the same samples rotated by
/// `shift_angle` in a seeded random 2-plane (fine-tuning task). Labels and the
/// train/dev split are shared between the two.
std::pair<TaskData, TaskData> make_task(const TaskSpec& spec);

// --- loss ------------------------------------------------------------------

struct LossGrad {
    double loss = 0.0;
    WeightVector grad;
};

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean softmax cross-entropy over `batch` and its exact gradient with respect
/// to the adapted weights `w`. Throws NumericError on non-finite activations.
LossGrad loss_and_grad(const Mlp& net, std::span<const double> w, const TaskData& data,
                       std::span<const std::size_t> batch);
Evaluation evaluate(const Mlp& net, std::span<const double> w, const TaskData& data,
                    std::span<const std::size_t> batch);

// --- optimizer -------------------------------------------------------------

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    OptimizerState() = default;
    OptimizerState(std::size_t n, double lr_, double weight_decay_)
        : first_moment(n, 0.0), second_moment(n, 0.0), lr(lr_), weight_decay(weight_decay_) {}
};

/// Bias-corrected Adam step, then decoupled decay p <- p - lr*λ*p.
void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grad);

enum class Schedule { Constant, Linear, Cosine };

Schedule parse_schedule(std::string_view name);
std::string_view to_string(Schedule s);

/// Multiplier on the base learning rate at 0-based `step` of `total_steps`.
/// Linear warmup over ceil(warmup_ratio*total) steps, then linear or cosine decay to 0.
double lr_multiplier(Schedule schedule, std::size_t step, std::size_t total_steps, double warmup_ratio);

// --- fine-tuning -----------------------------------------------------------

struct FinetuneOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double lr = 5e-3;
    double weight_decay = 0.1;
    double warmup_ratio = 0.06;
    Schedule schedule = Schedule::Linear;
    std::uint64_t seed = 0;
    /// Restore the coordinates of the best dev-accuracy epoch (first best wins).
    bool select_best = true;
};

struct TrainRecord {
    std::vector<double> train_loss;
    std::vector<double> dev_loss;
    std::vector<double> dev_acc;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran

    std::size_t epochs() const { return train_loss.size(); }
};

struct StepInfo {
    std::size_t epoch = 0;  // 1-based
    std::size_t batch = 0;  // 0-based within the epoch
    double loss = 0.0;
    double grad_w_norm = 0.0;
    double grad_params_norm = 0.0;
};

using StepObserver = std::function<void(const StepInfo&)>;

/// Trains the adapter's coordinates on `task.train` with w = w0 + delta(adapter).
/// w0 is read-only. Throws NumericError naming epoch and batch on a non-finite loss.
TrainRecord finetune(Adapter& adapter, const Mlp& net, const WeightVector& w0, const TaskData& task,
                     const FinetuneOptions& options, const StepObserver& observer = {});

/// Full training of every weight from `init_weights(config, init_seed)`.
WeightVector pretrain(const NetworkConfig& config, const TaskData& task, std::uint64_t init_seed,
                      const FinetuneOptions& options);

}  // namespace gpart
