// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

void TaskData::validate() const {
    if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
        throw ParameterError("task: inputs and labels disagree on sample count");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ParameterError("task: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
        }
    }
    std::vector<char> seen(labels.size(), 0);
    for (const auto* split : {&train, &dev}) {
        for (auto i : *split) {
            if (i >= labels.size() || seen[i]) {
                throw ParameterError("task: train/dev splits must be disjoint and in range");
            }
            seen[i] = 1;
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw ParameterError("task: train/dev splits must cover every sample");
    }
}

namespace {

Eigen::VectorXd normal_vector(std::size_t n, SplitMix64& rng) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v(i) = rng.normal();
    }
    return v;
}

}  // namespace

std::pair<TaskData, TaskData> make_task(const TaskSpec& spec) {
    if (spec.classes < 2 || spec.samples < spec.classes || spec.features < 2) {
        throw ParameterError("task needs samples >= classes >= 2 and features >= 2");
    }
    if (!(spec.cluster_std > 0.0) || !(spec.dev_fraction > 0.0 && spec.dev_fraction < 1.0)) {
        throw ParameterError("task needs cluster_std > 0 and dev_fraction in (0, 1)");
    }
    const auto features = static_cast<Eigen::Index>(spec.features);

    // Class means on a sphere, redrawn until every pair is far enough apart.
    SplitMix64 mean_rng(derive_seed(spec.seed, 1));
    std::vector<Eigen::VectorXd> means;
    const double min_dist = spec.min_separation * spec.cluster_std;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) {
            throw ParameterError("task: cannot place class means with the requested separation");
        }
        means.clear();
        for (std::size_t c = 0; c < spec.classes; ++c) {
            Eigen::VectorXd v = normal_vector(spec.features, mean_rng);
            means.push_back(v * (spec.mean_radius / v.norm()));
        }
        bool ok = true;
        for (std::size_t a = 0; a < means.size() && ok; ++a) {
            for (std::size_t b = a + 1; b < means.size() && ok; ++b) {
                ok = (means[a] - means[b]).norm() >= min_dist;
            }
        }
        if (ok) {
            break;
        }
    }

    TaskData pre;
    pre.classes = spec.classes;
    pre.inputs.resize(static_cast<Eigen::Index>(spec.samples), features);
    pre.labels.resize(spec.samples);
    SplitMix64 sample_rng(derive_seed(spec.seed, 2));
    for (std::size_t i = 0; i < spec.samples; ++i) {
        const auto y = static_cast<int>(i % spec.classes);
        pre.labels[i] = y;
        pre.inputs.row(static_cast<Eigen::Index>(i)) =
            (means[static_cast<std::size_t>(y)] + spec.cluster_std * normal_vector(spec.features, sample_rng))
                .transpose();
    }

    std::vector<std::size_t> order(spec.samples);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 split_rng(derive_seed(spec.seed, 3));
    fisher_yates(std::span<std::size_t>(order), split_rng);
    const auto dev_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(spec.samples))));
    pre.dev.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_count));
    pre.train.assign(order.begin() + static_cast<std::ptrdiff_t>(dev_count), order.end());
    std::sort(pre.dev.begin(), pre.dev.end());
    std::sort(pre.train.begin(), pre.train.end());

    // Rotation by shift_angle in span(u, v), identity on the complement.
    SplitMix64 plane_rng(derive_seed(spec.seed, 4));
    Eigen::VectorXd u = normal_vector(spec.features, plane_rng).normalized();
    Eigen::VectorXd v = normal_vector(spec.features, plane_rng);
    v = (v - u.dot(v) * u).normalized();
    const double c = std::cos(spec.shift_angle);
    const double s = std::sin(spec.shift_angle);
    const Matrix rotation = Matrix::Identity(features, features) + (c - 1.0) * (u * u.transpose() + v * v.transpose()) +
                            s * (v * u.transpose() - u * v.transpose());

    TaskData fine = pre;
    fine.inputs = pre.inputs * rotation.transpose();
    return {std::move(pre), std::move(fine)};
}

}  // namespace gpart
