// SPDX-License-Identifier: Apache-2.0
#include "gpart/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"

namespace gpart {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& text) {
    // from_chars for double is missing from older libstdc++.
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number<T>(trim(item)));
    }
    if (out.empty()) {
        throw std::invalid_argument("empty list");
    }
    return out;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + text + "'");
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"adapter", [](RunConfig& c, const std::string& v) { c.adapter = parse_adapter_kind(v); }},
        {"d", [](RunConfig& c, const std::string& v) { c.d = parse_number<std::size_t>(v); }},
        {"rank", [](RunConfig& c, const std::string& v) { c.rank = parse_number<std::size_t>(v); }},
        {"partition_seed", [](RunConfig& c, const std::string& v) { c.partition_seed = parse_number<std::uint64_t>(v); }},
        {"data_seed", [](RunConfig& c, const std::string& v) { c.data_seed = parse_number<std::uint64_t>(v); }},
        {"init_seed", [](RunConfig& c, const std::string& v) { c.init_seed = parse_number<std::uint64_t>(v); }},
        {"train_seed", [](RunConfig& c, const std::string& v) { c.train_seed = parse_number<std::uint64_t>(v); }},
        {"layer_dims", [](RunConfig& c, const std::string& v) { c.layer_dims = parse_list<std::size_t>(v); }},
        {"adapt_head", [](RunConfig& c, const std::string& v) { c.adapt_head = parse_bool(v); }},
        {"samples", [](RunConfig& c, const std::string& v) { c.samples = parse_number<std::size_t>(v); }},
        {"shift_angle", [](RunConfig& c, const std::string& v) { c.shift_angle = parse_real(v); }},
        {"dev_fraction", [](RunConfig& c, const std::string& v) { c.dev_fraction = parse_real(v); }},
        {"pretrain_epochs", [](RunConfig& c, const std::string& v) { c.pretrain_epochs = parse_number<std::size_t>(v); }},
        {"pretrain_lr", [](RunConfig& c, const std::string& v) { c.pretrain_lr = parse_real(v); }},
        {"epochs", [](RunConfig& c, const std::string& v) { c.epochs = parse_number<std::size_t>(v); }},
        {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_number<std::size_t>(v); }},
        {"lr", [](RunConfig& c, const std::string& v) { c.lr = parse_real(v); }},
        {"weight_decay", [](RunConfig& c, const std::string& v) { c.weight_decay = parse_real(v); }},
        {"warmup_ratio", [](RunConfig& c, const std::string& v) { c.warmup_ratio = parse_real(v); }},
        {"schedule", [](RunConfig& c, const std::string& v) { c.schedule = parse_schedule(v); }},
        {"sweep_repeats", [](RunConfig& c, const std::string& v) { c.sweep_repeats = parse_number<std::size_t>(v); }},
        {"grid_size", [](RunConfig& c, const std::string& v) { c.grid_size = parse_number<std::size_t>(v); }},
        {"alpha_min", [](RunConfig& c, const std::string& v) { c.alpha.lo = parse_real(v); }},
        {"alpha_max", [](RunConfig& c, const std::string& v) { c.alpha.hi = parse_real(v); }},
        {"beta_min", [](RunConfig& c, const std::string& v) { c.beta.lo = parse_real(v); }},
        {"beta_max", [](RunConfig& c, const std::string& v) { c.beta.hi = parse_real(v); }},
        {"direction_seeds", [](RunConfig& c, const std::string& v) { c.direction_seeds = parse_list<std::uint64_t>(v); }},
        {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
    };
    return table;
}

std::string real(double v) { return fmt::format("{:.10g}", v); }

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        const std::string where = "line " + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected `key = value`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw ConfigError(where + ": duplicate key '" + key + "'");
        }
        if (value.empty()) {
            throw ConfigError(where + ": key '" + key + "' has no value");
        }
        try {
            it->second(config, value);
        } catch (const std::exception& e) {
            throw ConfigError(where + ": bad value for key '" + key + "': " + e.what());
        }
        config.source_lines[key] = lineno;
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string RunConfig::to_text() const {
    std::string out;
    auto line = [&](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
    line("adapter", std::string(to_string(adapter)));
    line("d", std::to_string(d));
    line("rank", std::to_string(rank));
    line("partition_seed", std::to_string(partition_seed));
    line("data_seed", std::to_string(data_seed));
    line("init_seed", std::to_string(init_seed));
    line("train_seed", std::to_string(train_seed));
    line("layer_dims", join(layer_dims));
    line("adapt_head", adapt_head ? "true" : "false");
    line("samples", std::to_string(samples));
    line("shift_angle", real(shift_angle));
    line("dev_fraction", real(dev_fraction));
    line("pretrain_epochs", std::to_string(pretrain_epochs));
    line("pretrain_lr", real(pretrain_lr));
    line("epochs", std::to_string(epochs));
    line("batch_size", std::to_string(batch_size));
    line("lr", real(lr));
    line("weight_decay", real(weight_decay));
    line("warmup_ratio", real(warmup_ratio));
    line("schedule", std::string(to_string(schedule)));
    line("sweep_repeats", std::to_string(sweep_repeats));
    line("grid_size", std::to_string(grid_size));
    line("alpha_min", real(alpha.lo));
    line("alpha_max", real(alpha.hi));
    line("beta_min", real(beta.lo));
    line("beta_max", real(beta.hi));
    line("direction_seeds", join(direction_seeds));
    line("output_dir", output_dir.string());
    return out;
}

FinetuneOptions RunConfig::finetune_options() const {
    FinetuneOptions o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.lr = lr;
    o.weight_decay = weight_decay;
    o.warmup_ratio = warmup_ratio;
    o.schedule = schedule;
    o.seed = train_seed;
    return o;
}

TaskSpec RunConfig::task_spec() const {
    TaskSpec t;
    t.seed = data_seed;
    t.samples = samples;
    t.features = layer_dims.front();
    t.classes = layer_dims.back();
    t.shift_angle = shift_angle;
    t.dev_fraction = dev_fraction;
    return t;
}

LandscapeSpec RunConfig::landscape_spec() const {
    LandscapeSpec s;
    s.grid_size = grid_size;
    s.alpha = alpha;
    s.beta = beta;
    s.direction_seeds = direction_seeds;
    return s;
}

void validate_config(const RunConfig& config) {
    // "line N: key 'k'" when the key came from a file.
    auto key = [&](const std::string& k) {
        const auto it = config.source_lines.find(k);
        const std::string name = "key '" + k + "'";
        return it == config.source_lines.end() ? name : "line " + std::to_string(it->second) + ": " + name;
    };
    try {
        NetworkConfig{config.layer_dims}.validate();
        const auto manifest = mlp_manifest(NetworkConfig{config.layer_dims}, config.adapt_head);
        const bool subspace = config.adapter == AdapterKind::GPartIsometric ||
                              config.adapter == AdapterKind::GPartNonIsometric;
        if (subspace && (config.d == 0 || config.d > manifest.total())) {
            throw ConfigError(key("d") + ": " + std::to_string(config.d) + " outside [1, N=" +
                              std::to_string(manifest.total()) + "]");
        }
        if (config.adapter == AdapterKind::LoRA || config.adapter == AdapterKind::UniLoRA) {
            if (config.rank == 0) {
                throw ConfigError(key("rank") + ": must be >= 1");
            }
        }
        if (config.adapter == AdapterKind::UniLoRA) {
            const auto factor_total = lora_factor_manifest(manifest, config.rank).total();
            if (config.d == 0 || config.d > factor_total) {
                throw ConfigError(key("d") + ": " + std::to_string(config.d) + " outside [1, D=" +
                                  std::to_string(factor_total) + "]");
            }
        }
        if (config.batch_size == 0) {
            throw ConfigError(key("batch_size") + ": must be >= 1");
        }
        if (config.samples < config.layer_dims.back() || config.layer_dims.back() < 2 ||
            config.layer_dims.front() < 2) {
            throw ConfigError(key("samples") + "/'layer_dims': need samples >= classes >= 2 and features >= 2");
        }
        if (!(config.dev_fraction > 0.0 && config.dev_fraction < 1.0)) {
            throw ConfigError(key("dev_fraction") + ": must lie in (0, 1)");
        }
        if (!(config.warmup_ratio >= 0.0 && config.warmup_ratio <= 1.0)) {
            throw ConfigError(key("warmup_ratio") + ": must lie in [0, 1]");
        }
        config.landscape_spec().validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

Experiment build_experiment(const RunConfig& config) {
    validate_config(config);
    const NetworkConfig net_config{config.layer_dims};
    auto [pre, fine] = make_task(config.task_spec());

    FinetuneOptions pre_opts;
    pre_opts.epochs = config.pretrain_epochs;
    pre_opts.batch_size = config.batch_size;
    pre_opts.lr = config.pretrain_lr;
    pre_opts.weight_decay = 0.0;
    pre_opts.warmup_ratio = config.warmup_ratio;
    pre_opts.schedule = config.schedule;
    pre_opts.seed = derive_seed(config.train_seed, 0x5052455452414e);
    WeightVector w_full = pretrain(net_config, pre, config.init_seed, pre_opts);

    if (config.adapt_head) {
        Mlp net(net_config);
        WeightVector w0 = w_full;
        return Experiment{std::move(pre), std::move(fine), std::move(w_full), std::move(net), std::move(w0)};
    }
    const auto full_manifest = mlp_manifest(net_config, true);
    const auto& head = full_manifest.layers().back();
    Mlp net(net_config, Matrix(layer_view(w_full.span(), head)));
    WeightVector w0(std::vector<double>(w_full.values.begin(),
                                        w_full.values.begin() + static_cast<std::ptrdiff_t>(head.offset)));
    return Experiment{std::move(pre), std::move(fine), std::move(w_full), std::move(net), std::move(w0)};
}

std::unique_ptr<Adapter> make_adapter(const RunConfig& config, const ModelManifest& manifest) {
    switch (config.adapter) {
    case AdapterKind::GPartIsometric:
        return std::make_unique<GPartAdapter>(manifest, config.d, config.partition_seed, true);
    case AdapterKind::GPartNonIsometric:
        return std::make_unique<GPartAdapter>(manifest, config.d, config.partition_seed, false);
    case AdapterKind::LoRA:
        return std::make_unique<LoRAAdapter>(manifest, config.rank, config.init_seed);
    case AdapterKind::UniLoRA:
        return std::make_unique<UniLoRAAdapter>(manifest, config.rank, config.d, config.partition_seed,
                                                config.init_seed);
    case AdapterKind::FullFT:
        return std::make_unique<FullFTAdapter>(manifest);
    }
    throw ParameterError("unknown adapter kind");
}

}  // namespace gpart
