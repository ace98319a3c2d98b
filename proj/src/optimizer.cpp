// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <string>

#include "gpart/errors.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw ManifestError("adamw_step: parameter, gradient and moment lengths differ");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
        v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
        params[i] -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
        params[i] -= state.lr * state.weight_decay * params[i];
    }
}

Schedule parse_schedule(std::string_view name) {
    if (name == "constant") return Schedule::Constant;
    if (name == "linear") return Schedule::Linear;
    if (name == "cosine") return Schedule::Cosine;
    throw ParameterError("unknown schedule '" + std::string(name) + "'");
}

std::string_view to_string(Schedule s) {
    switch (s) {
    case Schedule::Constant:
        return "constant";
    case Schedule::Linear:
        return "linear";
    case Schedule::Cosine:
        return "cosine";
    }
    return "unknown";
}

double lr_multiplier(Schedule schedule, std::size_t step, std::size_t total_steps, double warmup_ratio) {
    if (schedule == Schedule::Constant || total_steps == 0) {
        return 1.0;
    }
    const auto warmup = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (step < warmup) {
        return static_cast<double>(step + 1) / static_cast<double>(warmup + 1);
    }
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(std::max<std::size_t>(1, total_steps - warmup));
    if (schedule == Schedule::Linear) {
        return std::max(0.0, 1.0 - progress);
    }
    return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace gpart
