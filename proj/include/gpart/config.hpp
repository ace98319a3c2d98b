// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gpart/adapters.hpp"
#include "gpart/geometry.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

/// Every knob of a run. Text form is one `key = value` per line; `#` starts a
/// comment; unknown keys are rejected.
struct RunConfig {
    AdapterKind adapter = AdapterKind::GPartIsometric;
    std::size_t d = 256;
    std::size_t rank = 2;

    std::uint64_t partition_seed = 17;
    std::uint64_t data_seed = 2;
    std::uint64_t init_seed = 11;
    std::uint64_t train_seed = 23;

    std::vector<std::size_t> layer_dims{16, 64, 64, 4};
    bool adapt_head = true;

    std::size_t samples = 1000;
    double shift_angle = 2.5;
    double dev_fraction = 0.2;

    std::size_t pretrain_epochs = 30;
    double pretrain_lr = 3e-3;

    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double lr = 5e-3;
    double weight_decay = 0.1;
    double warmup_ratio = 0.06;
    Schedule schedule = Schedule::Linear;

    std::size_t sweep_repeats = 1;
    std::size_t grid_size = 30;
    Interval alpha{-0.5, 0.5};
    Interval beta{-0.5, 0.5};
    std::vector<std::uint64_t> direction_seeds{1, 2, 3};

    std::filesystem::path output_dir = "out";

    /// 1-based line each key was read from; empty for built-in defaults.
    std::map<std::string, std::size_t> source_lines;

    /// Resolved form: every key, in a fixed order.
    std::string to_text() const;
    FinetuneOptions finetune_options() const;
    TaskSpec task_spec() const;
    LandscapeSpec landscape_spec() const;
};

/// Parses config text. Throws ConfigError naming the key and 1-based line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Checks cross-field constraints (d <= N, rank, dims) against the derived manifest.
void validate_config(const RunConfig& config);

/// Everything a run derives deterministically from its config.
struct Experiment {
    TaskData pretrain_task;
    TaskData task;         // fine-tuning task
    WeightVector w_full;   // pretrained weights, every layer
    Mlp net;               // adapted structure (head frozen when excluded)
    WeightVector w0;       // pretrained weights restricted to the adapted manifest
};

Experiment build_experiment(const RunConfig& config);

/// Fresh adapter of the configured kind over `manifest`.
std::unique_ptr<Adapter> make_adapter(const RunConfig& config, const ModelManifest& manifest);

}  // namespace gpart
