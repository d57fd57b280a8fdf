// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
//
// Command-line front end: generate synthetic workloads, replay them through
// the gateway simulator across cache-size sweeps, and aggregate the results
// into plot-ready tables.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "migsim/cli.hpp"

namespace {

// Exit codes: 0 success, 2 configuration problems, 3 input parse or
// validation failures, 1 anything else.
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;

int run(int argc, char** argv) {
    CLI::App app{"Cache gateway simulator for medical imaging workloads"};
    app.require_subcommand(1);

    migsim::GenerateOptions gen;
    CLI::App* generate = app.add_subcommand(
        "generate", "Generate a synthetic trace, repository index, and ground-truth labels");
    generate->add_option("--config", gen.config_path, "Configuration file (JSON)");
    generate->add_option("--out", gen.out_dir, "Output directory")->required();
    generate->add_option("--seed", gen.seed, "Override workload.seed");

    migsim::SimulateOptions sim;
    CLI::App* simulate =
        app.add_subcommand("simulate", "Replay a trace through the gateway across cache sizes");
    simulate->add_option("--config", sim.config_path, "Configuration file (JSON)");
    simulate->add_option("--trace", sim.trace_path, "Trace file (JSON Lines)")->required();
    simulate->add_option("--index", sim.index_path, "Repository index file (JSON Lines)")
        ->required();
    simulate->add_option("--out", sim.out_dir, "Output directory")->required();
    simulate->add_option("--seed", sim.seed, "Override sim.seed");
    simulate->add_option("--cache-sizes", sim.cache_sizes,
                         "Comma-separated sizes (bytes, K/M/G/T, or % of repository)");
    simulate->add_option("--reps", sim.repetitions, "Repetitions per sweep point");
    simulate->add_flag("--no-prefetch", sim.no_prefetch,
                       "Run only the eviction-only configuration");
    simulate->add_flag("--dump-cache", sim.dump_cache,
                       "Write the first sweep point's final cache state");
    simulate->add_flag("--dump-messages", sim.dump_messages,
                       "Write the first sweep point's message sensor log");
    simulate->add_flag("--dump-training-log", sim.dump_training_log,
                       "Write the first sweep point's classifier training log");

    migsim::ReportOptions rep;
    CLI::App* report =
        app.add_subcommand("report", "Aggregate an experiment CSV into per-fraction tables");
    report->add_option("--input", rep.experiment_csv, "experiment.csv from simulate")
        ->required();
    report->add_option("--out", rep.out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) migsim::cmd_generate(gen);
    if (simulate->parsed()) migsim::cmd_simulate(sim);
    if (report->parsed()) migsim::cmd_report(rep);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const migsim::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const migsim::ParseError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitParse;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOther;
    }
}
