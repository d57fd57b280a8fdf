// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "migsim/config.hpp"
#include "migsim/report.hpp"
#include "migsim/sim.hpp"
#include "migsim/trace_io.hpp"
#include "migsim/workload.hpp"

namespace migsim {

// Command handlers throw on failure; the binary maps exception categories to
// exit codes. Everything here is also callable from tests.

namespace cli_detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << text;
}

inline AppConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return AppConfig{};
    return load_config(config_path);
}

inline std::vector<std::string> split_commas(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    for (char c : csv) {
        if (c == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item += c;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

} // namespace cli_detail

struct GenerateOptions {
    std::string config_path; // empty = defaults
    std::string out_dir;
    std::optional<uint64_t> seed;
};

inline void cmd_generate(const GenerateOptions& opt) {
    AppConfig cfg = cli_detail::load_or_default(opt.config_path);
    if (opt.seed) cfg.workload.seed = *opt.seed;
    cfg.workload.validate();
    std::filesystem::create_directories(opt.out_dir);
    std::filesystem::path out(opt.out_dir);

    Workload wl = generate_workload(cfg.workload);
    write_trace_file((out / "trace.jsonl").string(), wl.events);
    write_index_file((out / "index.jsonl").string(), wl.index);
    write_labels_file((out / "labels.jsonl").string(), wl.labels);
    cli_detail::write_text_file(out / "config_used.json", cfg.to_json().dump(2) + "\n");
}

struct SimulateOptions {
    std::string config_path; // empty = defaults
    std::string trace_path;
    std::string index_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<std::string> cache_sizes; // comma-separated specs
    std::optional<int> repetitions;
    bool no_prefetch = false;
    bool dump_cache = false;
    bool dump_messages = false;
    bool dump_training_log = false;
};

inline void cmd_simulate(const SimulateOptions& opt) {
    AppConfig cfg = cli_detail::load_or_default(opt.config_path);
    if (opt.seed) cfg.sim.seed = *opt.seed;
    if (opt.cache_sizes) cfg.sim.cache_sizes = cli_detail::split_commas(*opt.cache_sizes);
    if (opt.repetitions) cfg.sim.repetitions = *opt.repetitions;
    if (opt.no_prefetch) cfg.sim.prefetch_enabled = false;
    cfg.validate();

    RepositoryIndex index = read_index_file(opt.index_path);
    std::vector<TraceEvent> trace = read_trace_file(opt.trace_path);

    std::vector<uint64_t> sizes;
    for (const std::string& spec : cfg.sim.cache_sizes)
        sizes.push_back(parse_size_spec(spec, index.total_bytes()));

    std::filesystem::create_directories(opt.out_dir);
    std::filesystem::path out(opt.out_dir);

    SimConfig base = cfg.make_sim_config();
    auto cells = run_experiment(trace, index, sizes, cfg.sim.repetitions, base,
                                cfg.sim.prefetch_enabled);

    {
        std::ofstream csv(out / "experiment.csv");
        if (!csv) throw ConfigError("cannot open experiment.csv for writing");
        write_experiment_csv(csv, cells);
    }
    {
        std::vector<ExperimentRow> rows;
        for (const ExperimentCell& c : cells)
            rows.push_back({c.cache_fraction, c.config, c.repetition, c.report.hit_ratio,
                            c.report.retrieval_time_per_image_s, c.report.bytes_prefetched,
                            c.report.prefetch_precision, c.report.evictions});
        cli_detail::write_text_file(out / "summary.json",
                                    summary_json(aggregate(rows)).dump(2) + "\n");
    }
    cli_detail::write_text_file(out / "config_used.json", cfg.to_json().dump(2) + "\n");

    // Debug streams rerun the first sweep point with sinks attached.
    if (opt.dump_cache || opt.dump_messages || opt.dump_training_log) {
        std::vector<MessageLogRecord> messages;
        std::vector<TrainingLogRecord> training_log;
        SimSinks sinks;
        if (opt.dump_messages) sinks.messages = &messages;
        if (opt.dump_training_log) sinks.training_log = &training_log;
        SimConfig dbg = base;
        dbg.cache_capacity_bytes = sizes.front();
        dbg.prefetch_enabled = cfg.sim.prefetch_enabled;
        dbg.seed = derive_seed(base.seed, 1, dbg.prefetch_enabled ? 2 : 1, 1);
        SimReport report = run_simulation(trace, index, dbg, sinks);
        if (opt.dump_cache) {
            std::ofstream f(out / "cache_dump.jsonl");
            for (const CacheEntry& e : report.final_cache) {
                nlohmann::ordered_json j;
                j["study_uid"] = e.study_uid;
                j["size_bytes"] = e.size_bytes;
                j["inserted_at"] = e.inserted_at;
                j["last_access_at"] = e.last_access_at;
                j["origin"] = to_string(e.origin);
                f << j.dump() << '\n';
            }
        }
        if (opt.dump_messages) {
            std::ofstream f(out / "messages.jsonl");
            for (const MessageLogRecord& r : messages) f << r.to_json().dump() << '\n';
        }
        if (opt.dump_training_log) {
            std::ofstream f(out / "training_log.jsonl");
            write_training_log(f, training_log);
        }
    }
}

struct ReportOptions {
    std::string experiment_csv;
    std::string out_dir;
};

inline void cmd_report(const ReportOptions& opt) {
    std::ifstream in(opt.experiment_csv);
    if (!in) throw ParseError("cannot open '" + opt.experiment_csv + "' for reading");
    std::vector<ExperimentRow> rows = read_experiment_csv(in, opt.experiment_csv);
    AggregateTable table = aggregate(rows);

    std::filesystem::create_directories(opt.out_dir);
    std::filesystem::path out(opt.out_dir);
    {
        std::ofstream f(out / "hit_ratio_by_fraction.csv");
        if (!f) throw ConfigError("cannot open hit_ratio_by_fraction.csv for writing");
        write_hit_ratio_table(f, table);
    }
    {
        std::ofstream f(out / "retrieval_time_by_fraction.csv");
        if (!f) throw ConfigError("cannot open retrieval_time_by_fraction.csv for writing");
        write_retrieval_time_table(f, table);
    }
}

} // namespace migsim
