// SPDX-License-Identifier: Apache-2.0
// gpart_lab: train, sweep, landscape export, property checks and checkpoint packing.
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gpart/adapters.hpp"
#include "gpart/config.hpp"
#include "gpart/errors.hpp"
#include "gpart/geometry.hpp"
#include "gpart/properties.hpp"
#include "gpart/report.hpp"
#include "gpart/trainer.hpp"

namespace fs = std::filesystem;
using namespace gpart;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kConfig = 2, kNumeric = 3, kFormat = 4 };

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

// One number per line or comma separated; blank lines and `#` comments skipped.
std::vector<double> read_theta_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::stringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            const auto first = field.find_first_not_of(" \t\r");
            if (first == std::string::npos) {
                continue;
            }
            const auto last = field.find_last_not_of(" \t\r");
            const std::string token = field.substr(first, last - first + 1);
            double v = 0.0;
            const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc() || end != token.data() + token.size()) {
                throw ConfigError(fmt::format("line {}: '{}' is not a number", line_no, token));
            }
            values.push_back(v);
        }
    }
    return values;
}

int cmd_verify(const VerifyOptions& options) {
    const auto results = run_properties(options);
    if (results.empty()) {
        std::cerr << "no property matches '" << options.filter << "'\n";
        return kConfig;
    }
    std::size_t failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
    }
    std::cout << fmt::format("{}/{} properties passed\n", results.size() - failed, results.size());
    return failed == 0 ? kOk : kFailed;
}

int cmd_train(const fs::path& config_path, const std::optional<fs::path>& out_override) {
    RunConfig config = load_config(config_path);
    if (out_override) {
        config.output_dir = *out_override;
    }
    validate_config(config);
    const Experiment exp = build_experiment(config);
    auto adapter = make_adapter(config, exp.net.manifest());

    const auto frozen = evaluate(exp.net, exp.w0.span(), exp.task, exp.task.dev);
    const TrainRecord record = finetune(*adapter, exp.net, exp.w0, exp.task, config.finetune_options());

    fs::create_directories(config.output_dir);
    {
        auto out = open_output(config.output_dir / "train_record.csv");
        write_train_record_csv(record, out);
    }
    {
        auto out = open_output(config.output_dir / "resolved_config.txt");
        out << config.to_text();
    }
    if (const auto* g = dynamic_cast<const GPartAdapter*>(adapter.get())) {
        save_checkpoint(*g, config.output_dir / "checkpoint.gprt");
    }

    const std::size_t best = record.best_epoch - 1;
    std::cout << fmt::format("adapter {}  trainable {}  N {}\n", to_string(config.adapter),
                             adapter->count_trainable(), exp.net.manifest().total());
    std::cout << fmt::format("frozen dev_acc {}  best epoch {}  dev_acc {}  dev_loss {}\n",
                             format_number(frozen.accuracy), record.best_epoch,
                             format_number(record.dev_acc[best]), format_number(record.dev_loss[best]));
    std::cout << "wrote " << config.output_dir.string() << '\n';
    return kOk;
}

int cmd_landscape(const fs::path& checkpoint, const fs::path& config_path, const std::optional<fs::path>& out_path,
                  std::size_t threads) {
    const RunConfig config = load_config(config_path);
    validate_config(config);
    const Experiment exp = build_experiment(config);
    const GPartAdapter adapter = load_checkpoint(checkpoint, exp.net.manifest());
    const LandscapeGrid grid = loss_landscape(adapter, exp.net, exp.w0, exp.task, config.landscape_spec(), threads);

    const fs::path target = out_path.value_or(config.output_dir / "landscape.csv");
    auto out = open_output(target);
    write_landscape_csv(grid, out);
    std::cout << fmt::format("{}x{} grid, {} direction seeds, {} flagged cells -> {}\n", grid.alphas.size(),
                             grid.betas.size(), grid.per_seed.size(), grid.flagged, target.string());
    return kOk;
}

std::vector<std::size_t> parse_d_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || end != token.data() + token.size() || v == 0) {
            throw ConfigError("bad d value '" + token + "' in --d");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("--d needs at least one value");
    }
    return out;
}

int cmd_sweep(const fs::path& config_path, const std::string& d_list, const std::optional<fs::path>& out_path) {
    const RunConfig config = load_config(config_path);
    // The sweep trains isometric GPart at its own d values; `adapter` and `d` are ignored.
    RunConfig checked = config;
    checked.adapter = AdapterKind::GPartIsometric;
    checked.d = 1;
    validate_config(checked);
    const auto ds = parse_d_list(d_list);
    const std::size_t total = mlp_manifest(NetworkConfig{config.layer_dims}, config.adapt_head).total();
    for (const auto d : ds) {
        if (d > total) {
            throw ConfigError(fmt::format("--d value {} exceeds N = {}", d, total));
        }
    }
    const Experiment exp = build_experiment(checked);
    const SweepContext ctx{exp.net, exp.w0, exp.task, config.finetune_options(), config.partition_seed};
    const auto rows = dim_sweep(ds, ctx, config.sweep_repeats);

    const fs::path target = out_path.value_or(config.output_dir / "sweep.csv");
    auto out = open_output(target);
    write_sweep_csv(rows, out);
    for (const auto& row : rows) {
        std::cout << fmt::format("d {:>6}  dev_acc {} ± {}  runs {}  failures {}\n", row.d,
                                 format_number(row.mean_dev_acc), format_number(row.std_dev_acc), row.runs,
                                 row.failures);
        for (const auto& e : row.errors) {
            std::cout << "    " << e << '\n';
        }
    }
    return kOk;
}

int cmd_pack(const fs::path& theta_csv, std::uint64_t seed, std::size_t total, std::size_t dim, bool noniso,
             const fs::path& out_path) {
    auto theta = read_theta_csv(theta_csv);
    if (theta.size() != dim) {
        throw ConfigError(fmt::format("θ has {} values but d = {}", theta.size(), dim));
    }
    if (dim == 0 || dim > total) {
        throw ConfigError(fmt::format("need 1 <= d <= N, got d = {}, N = {}", dim, total));
    }
    write_checkpoint(CheckpointData{!noniso, seed, total, std::move(theta)}, out_path);
    std::cout << fmt::format("packed {} bytes -> {}\n", kCheckpointHeaderBytes + 8 * dim, out_path.string());
    return kOk;
}

int cmd_unpack(const fs::path& checkpoint, const fs::path& out_csv) {
    const CheckpointData data = read_checkpoint(checkpoint);
    auto out = open_output(out_csv);
    write_vector_csv(data.theta, out);
    std::cout << fmt::format("seed {}\nd {}\nN {}\nmode {}\n", data.seed, data.theta.size(), data.total,
                             data.isometric ? "isometric" : "nonisometric");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GPart lab: partition-matrix fine-tuning experiments"};
    app.require_subcommand(1);

    VerifyOptions verify_opts;
    auto* verify = app.add_subcommand("verify", "Run the property suite");
    verify->add_option("--filter", verify_opts.filter, "Only properties whose name contains this string");
    verify->add_flag("--inject-unscaled-projection", verify_opts.drop_projection_scale,
                     "Fault injection: project without the 1/sqrt(n_j) scale");

    fs::path config_path;
    std::optional<fs::path> out_path;

    auto* train = app.add_subcommand("train", "Fine-tune per a config file");
    train->add_option("config", config_path, "Config file")->required();
    train->add_option("--out-dir", out_path, "Override output_dir");

    fs::path checkpoint;
    std::size_t threads = 1;
    auto* landscape = app.add_subcommand("landscape", "Export the 2-D loss landscape around a checkpoint");
    landscape->add_option("checkpoint", checkpoint, "GPRT checkpoint")->required();
    landscape->add_option("config", config_path, "Config file the checkpoint was trained with")->required();
    landscape->add_option("-o,--out", out_path, "CSV path (default <output_dir>/landscape.csv)");
    landscape->add_option("--threads", threads, "Evaluate grid cells on this many threads")
        ->check(CLI::PositiveNumber);

    std::string d_list;
    auto* sweep = app.add_subcommand("sweep", "Dev accuracy across subspace dimensions");
    sweep->add_option("config", config_path, "Config file")->required();
    sweep->add_option("--d", d_list, "Comma-separated d values")->required();
    sweep->add_option("-o,--out", out_path, "CSV path (default <output_dir>/sweep.csv)");

    fs::path theta_csv;
    fs::path pack_out;
    std::uint64_t seed = 0;
    std::size_t total = 0;
    std::size_t dim = 0;
    bool noniso = false;
    auto* pack = app.add_subcommand("pack", "Write a checkpoint from θ values");
    pack->add_option("theta_csv", theta_csv, "θ values")->required();
    pack->add_option("--seed", seed, "Partition seed")->required();
    pack->add_option("--N", total, "Weight-space size")->required();
    pack->add_option("--d", dim, "Subspace dimension")->required();
    pack->add_flag("--noniso", noniso, "Mark the checkpoint non-isometric");
    pack->add_option("-o,--out", pack_out, "Checkpoint path")->required();

    fs::path unpack_csv;
    auto* unpack = app.add_subcommand("unpack", "Print a checkpoint header and write θ as CSV");
    unpack->add_option("checkpoint", checkpoint, "GPRT checkpoint")->required();
    unpack->add_option("-o,--out", unpack_csv, "θ CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*verify) return cmd_verify(verify_opts);
        if (*train) return cmd_train(config_path, out_path);
        if (*landscape) return cmd_landscape(checkpoint, config_path, out_path, threads);
        if (*sweep) return cmd_sweep(config_path, d_list, out_path);
        if (*pack) return cmd_pack(theta_csv, seed, total, dim, noniso, pack_out);
        if (*unpack) return cmd_unpack(checkpoint, unpack_csv);
    } catch (const FormatError& e) {
        std::cerr << "format error at byte " << e.offset() << ": " << e.what() << '\n';
        return kFormat;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const CompatibilityError& e) {
        std::cerr << "incompatible checkpoint: " << e.what() << '\n';
        return kConfig;
    } catch (const ManifestError& e) {
        std::cerr << "manifest error: " << e.what() << '\n';
        return kConfig;
    } catch (const ParameterError& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kFailed;
}
