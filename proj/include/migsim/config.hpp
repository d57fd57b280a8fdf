// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "migsim/errors.hpp"
#include "migsim/sim.hpp"
#include "migsim/workload.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Size specifications: "123456" bytes, "2.5G" binary units, or "0.5%" of a
// reference total (resolved by the caller that knows the total).
// ---------------------------------------------------------------------------

inline uint64_t parse_size_spec(const std::string& spec,
                                std::optional<uint64_t> percent_of = std::nullopt) {
    std::string s;
    for (char c : spec)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw ConfigError("size spec is empty");
    size_t pos = 0;
    double value;
    try {
        value = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("bad size spec '" + spec + "'");
    }
    if (value < 0) throw ConfigError("size spec '" + spec + "' is negative");
    std::string suffix = s.substr(pos);
    double multiplier = 1.0;
    if (suffix.empty()) multiplier = 1.0;
    else if (suffix == "K" || suffix == "k") multiplier = double(1ull << 10);
    else if (suffix == "M" || suffix == "m") multiplier = double(1ull << 20);
    else if (suffix == "G" || suffix == "g") multiplier = double(1ull << 30);
    else if (suffix == "T" || suffix == "t") multiplier = double(1ull << 40);
    else if (suffix == "%") {
        if (!percent_of)
            throw ConfigError("size spec '" + spec + "': percentage not allowed here");
        multiplier = double(*percent_of) / 100.0;
    } else {
        throw ConfigError("bad size spec suffix '" + suffix + "' in '" + spec + "'");
    }
    double bytes = value * multiplier;
    if (bytes > 9.0e18) throw ConfigError("size spec '" + spec + "' overflows");
    return uint64_t(std::llround(bytes));
}

// ---------------------------------------------------------------------------
// The whole application configuration: one document, sections per module.
// Defaults run a desk-scale experiment out of the box.
// ---------------------------------------------------------------------------

struct MlpSection {
    size_t hidden = 16;
    TrainParams train; // epochs 5, learning rate 0.05, no weight decay
};

struct SimSection {
    std::vector<std::string> cache_sizes = {"0.125%", "0.5%", "1%", "2.5%", "5%"};
    int repetitions = 10;
    uint64_t seed = 1;
    bool per_image_time = false;
    bool prefetch_enabled = true;
};

struct AppConfig {
    WorkloadConfig workload;
    double high_watermark = 0.95; // cache section
    double low_watermark = 0.85;
    NetworkModel network;
    SensorConfig sensors;
    PrefetchConfig prefetch;
    MlpSection mlp;
    int64_t attribution_window_seconds = 3600; // patterns section
    SimSection sim;

    // Capacity is filled per sweep point by the experiment driver.
    SimConfig make_sim_config() const {
        SimConfig cfg;
        cfg.high_watermark = high_watermark;
        cfg.low_watermark = low_watermark;
        cfg.prefetch_enabled = sim.prefetch_enabled;
        cfg.network = network;
        cfg.sensors = sensors;
        cfg.prefetch = prefetch;
        cfg.train = mlp.train;
        cfg.classifier_hidden = mlp.hidden;
        cfg.scorer_hidden = mlp.hidden;
        cfg.attribution_window_seconds = attribution_window_seconds;
        cfg.seed = sim.seed;
        cfg.per_image_time = sim.per_image_time;
        return cfg;
    }

    void validate() const {
        workload.validate();
        if (!(high_watermark > 0.0 && high_watermark <= 1.0))
            throw ConfigError("cache.high_watermark: must be in (0, 1]");
        if (!(low_watermark > 0.0 && low_watermark < high_watermark))
            throw ConfigError("cache.low_watermark: must be in (0, high_watermark)");
        network.validate();
        sensors.validate();
        prefetch.validate();
        if (mlp.hidden < 1) throw ConfigError("mlp.hidden: must be >= 1");
        if (mlp.train.epochs < 1) throw ConfigError("mlp.epochs: must be >= 1");
        if (mlp.train.learning_rate < 0.0) throw ConfigError("mlp.learning_rate: must be >= 0");
        if (mlp.train.weight_decay < 0.0) throw ConfigError("mlp.weight_decay: must be >= 0");
        if (attribution_window_seconds <= 0)
            throw ConfigError("patterns.attribution_window_seconds: must be > 0");
        if (sim.cache_sizes.empty()) throw ConfigError("sim.cache_sizes: must not be empty");
        for (const std::string& s : sim.cache_sizes)
            parse_size_spec(s, uint64_t(1) << 40); // syntax check only
        if (sim.repetitions < 1) throw ConfigError("sim.repetitions: must be >= 1");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        auto& w = j["workload"];
        w["duration_days"] = workload.duration_days;
        w["n_studies"] = workload.n_studies;
        w["total_repo_bytes"] = workload.total_repo_bytes;
        w["n_workstations"] = workload.n_workstations;
        w["class_mix"] = workload.class_mix;
        w["session_rate_per_day"] = workload.session_rate_per_day;
        w["retrieves_min"] = workload.retrieves_per_session.min;
        w["retrieves_max"] = workload.retrieves_per_session.max;
        w["retrieves_mean"] = workload.retrieves_per_session.mean;
        w["seed"] = workload.seed;
        w["working_set_skew"] = workload.working_set_skew;
        auto& c = j["cache"];
        c["high_watermark"] = high_watermark;
        c["low_watermark"] = low_watermark;
        auto& n = j["network"];
        n["wan_bandwidth_bytes_per_s"] = network.wan_bandwidth_bytes_per_s;
        n["wan_rtt_s"] = network.wan_rtt_s;
        n["lan_bandwidth_bytes_per_s"] = network.lan_bandwidth_bytes_per_s;
        n["lan_overhead_s"] = network.lan_overhead_s;
        auto& se = j["sensors"];
        se["window_seconds"] = sensors.window_seconds;
        se["idle_threshold"] = sensors.idle_threshold;
        auto& p = j["prefetch"];
        p["top_k_cells"] = prefetch.top_k_cells;
        p["fill_fraction"] = prefetch.fill_fraction;
        p["score_floor"] = prefetch.score_floor;
        p["short_term_budget_fraction"] = prefetch.short_term_budget_fraction;
        p["counter_halving_days"] = prefetch.counter_halving_days;
        auto& m = j["mlp"];
        m["hidden"] = mlp.hidden;
        m["epochs"] = mlp.train.epochs;
        m["learning_rate"] = mlp.train.learning_rate;
        m["weight_decay"] = mlp.train.weight_decay;
        auto& pa = j["patterns"];
        pa["attribution_window_seconds"] = attribution_window_seconds;
        auto& s = j["sim"];
        s["cache_sizes"] = sim.cache_sizes;
        s["repetitions"] = sim.repetitions;
        s["seed"] = sim.seed;
        s["per_image_time"] = sim.per_image_time;
        s["prefetch_enabled"] = sim.prefetch_enabled;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Loading. Unknown keys are rejected with the source line; value errors name
// the offending key.
// ---------------------------------------------------------------------------

namespace config_detail {

// 1-based line of the first occurrence of "key" (quoted) in the raw text.
inline size_t line_of_key(const std::string& text, const std::string& key) {
    std::string needle = "\"" + key + "\"";
    size_t pos = text.find(needle);
    if (pos == std::string::npos) return 0;
    return size_t(std::count(text.begin(), text.begin() + std::ptrdiff_t(pos), '\n')) + 1;
}

using Setter = std::function<void(const nlohmann::ordered_json&)>;

inline void apply_section(const nlohmann::ordered_json& section, const std::string& section_name,
                          const std::map<std::string, Setter>& setters,
                          const std::string& source, const std::string& raw_text) {
    if (!section.is_object())
        throw ConfigError(source + ": section '" + section_name + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) {
            size_t line = line_of_key(raw_text, key);
            throw ConfigError(source + ":" + std::to_string(line) + ": unknown key '" + key +
                              "' in section '" + section_name + "'");
        }
        try {
            it->second(value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(source + ": key '" + section_name + "." + key + "': " + e.what());
        }
    }
}

// total_repo_bytes and friends accept either a number or a size string.
inline uint64_t size_value(const nlohmann::ordered_json& v) {
    if (v.is_string()) return parse_size_spec(v.get<std::string>());
    return v.get<uint64_t>();
}

} // namespace config_detail

inline AppConfig parse_config(const std::string& text, const std::string& source) {
    using config_detail::apply_section;
    using config_detail::Setter;
    nlohmann::ordered_json root;
    try {
        root = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError(source + ": top level must be an object");

    AppConfig cfg;
    using J = nlohmann::ordered_json;

    std::map<std::string, Setter> workload_keys = {
        {"duration_days", [&](const J& v) { cfg.workload.duration_days = v.get<int>(); }},
        {"n_studies", [&](const J& v) { cfg.workload.n_studies = v.get<int>(); }},
        {"total_repo_bytes",
         [&](const J& v) { cfg.workload.total_repo_bytes = config_detail::size_value(v); }},
        {"n_workstations", [&](const J& v) { cfg.workload.n_workstations = v.get<int>(); }},
        {"class_mix",
         [&](const J& v) { cfg.workload.class_mix = v.get<std::array<double, 4>>(); }},
        {"session_rate_per_day",
         [&](const J& v) { cfg.workload.session_rate_per_day = v.get<double>(); }},
        {"retrieves_min", [&](const J& v) { cfg.workload.retrieves_per_session.min = v.get<int>(); }},
        {"retrieves_max", [&](const J& v) { cfg.workload.retrieves_per_session.max = v.get<int>(); }},
        {"retrieves_mean",
         [&](const J& v) { cfg.workload.retrieves_per_session.mean = v.get<double>(); }},
        {"seed", [&](const J& v) { cfg.workload.seed = v.get<uint64_t>(); }},
        {"working_set_skew",
         [&](const J& v) { cfg.workload.working_set_skew = v.get<double>(); }},
    };
    std::map<std::string, Setter> cache_keys = {
        {"high_watermark", [&](const J& v) { cfg.high_watermark = v.get<double>(); }},
        {"low_watermark", [&](const J& v) { cfg.low_watermark = v.get<double>(); }},
    };
    std::map<std::string, Setter> network_keys = {
        {"wan_bandwidth_bytes_per_s",
         [&](const J& v) { cfg.network.wan_bandwidth_bytes_per_s = v.get<double>(); }},
        {"wan_rtt_s", [&](const J& v) { cfg.network.wan_rtt_s = v.get<double>(); }},
        {"lan_bandwidth_bytes_per_s",
         [&](const J& v) { cfg.network.lan_bandwidth_bytes_per_s = v.get<double>(); }},
        {"lan_overhead_s", [&](const J& v) { cfg.network.lan_overhead_s = v.get<double>(); }},
    };
    std::map<std::string, Setter> sensor_keys = {
        {"window_seconds", [&](const J& v) { cfg.sensors.window_seconds = v.get<double>(); }},
        {"idle_threshold", [&](const J& v) { cfg.sensors.idle_threshold = v.get<double>(); }},
    };
    std::map<std::string, Setter> prefetch_keys = {
        {"top_k_cells", [&](const J& v) { cfg.prefetch.top_k_cells = v.get<int>(); }},
        {"fill_fraction", [&](const J& v) { cfg.prefetch.fill_fraction = v.get<double>(); }},
        {"score_floor", [&](const J& v) { cfg.prefetch.score_floor = v.get<double>(); }},
        {"short_term_budget_fraction",
         [&](const J& v) { cfg.prefetch.short_term_budget_fraction = v.get<double>(); }},
        {"counter_halving_days",
         [&](const J& v) { cfg.prefetch.counter_halving_days = v.get<int>(); }},
    };
    std::map<std::string, Setter> mlp_keys = {
        {"hidden", [&](const J& v) { cfg.mlp.hidden = v.get<size_t>(); }},
        {"epochs", [&](const J& v) { cfg.mlp.train.epochs = v.get<size_t>(); }},
        {"learning_rate", [&](const J& v) { cfg.mlp.train.learning_rate = v.get<double>(); }},
        {"weight_decay", [&](const J& v) { cfg.mlp.train.weight_decay = v.get<double>(); }},
    };
    std::map<std::string, Setter> patterns_keys = {
        {"attribution_window_seconds",
         [&](const J& v) { cfg.attribution_window_seconds = v.get<int64_t>(); }},
    };
    std::map<std::string, Setter> sim_keys = {
        {"cache_sizes",
         [&](const J& v) {
             cfg.sim.cache_sizes.clear();
             for (const auto& e : v) {
                 if (e.is_string()) cfg.sim.cache_sizes.push_back(e.get<std::string>());
                 else cfg.sim.cache_sizes.push_back(std::to_string(e.get<uint64_t>()));
             }
         }},
        {"repetitions", [&](const J& v) { cfg.sim.repetitions = v.get<int>(); }},
        {"seed", [&](const J& v) { cfg.sim.seed = v.get<uint64_t>(); }},
        {"per_image_time", [&](const J& v) { cfg.sim.per_image_time = v.get<bool>(); }},
        {"prefetch_enabled", [&](const J& v) { cfg.sim.prefetch_enabled = v.get<bool>(); }},
    };

    std::map<std::string, const std::map<std::string, Setter>*> sections = {
        {"workload", &workload_keys}, {"cache", &cache_keys},     {"network", &network_keys},
        {"sensors", &sensor_keys},    {"prefetch", &prefetch_keys}, {"mlp", &mlp_keys},
        {"patterns", &patterns_keys}, {"sim", &sim_keys},
    };
    for (const auto& [name, value] : root.items()) {
        auto it = sections.find(name);
        if (it == sections.end()) {
            size_t line = config_detail::line_of_key(text, name);
            throw ConfigError(source + ":" + std::to_string(line) + ": unknown section '" +
                              name + "'");
        }
        apply_section(value, name, *it->second, source, text);
    }
    cfg.validate();
    return cfg;
}

inline AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

} // namespace migsim
