// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "migsim/errors.hpp"
#include "migsim/sim.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Experiment CSV. One row per simulation; the fixed column set below is the
// machine-readable contract for downstream tooling.
// ---------------------------------------------------------------------------

inline constexpr const char* kExperimentCsvHeader =
    "cache_fraction,config,repetition,hit_ratio,retrieval_time_per_image_s,"
    "bytes_prefetched,prefetch_precision,evictions";

struct ExperimentRow {
    double cache_fraction = 0.0;
    int config = 1;
    int repetition = 0;
    double hit_ratio = 0.0;
    double retrieval_time_per_image_s = 0.0;
    uint64_t bytes_prefetched = 0;
    double prefetch_precision = 0.0;
    uint64_t evictions = 0;
};

namespace report_detail {

// Shortest stable decimal form; identical inputs print identically, which
// the byte-identical rerun guarantee rests on.
inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

inline double parse_double(const std::string& s, const std::string& source, size_t line) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(source, line, "bad numeric field '" + s + "'");
    }
}

} // namespace report_detail

inline void write_experiment_csv(std::ostream& out, const std::vector<ExperimentCell>& cells) {
    using report_detail::fmt;
    out << kExperimentCsvHeader << '\n';
    for (const ExperimentCell& c : cells) {
        out << fmt(c.cache_fraction) << ',' << c.config << ',' << c.repetition << ','
            << fmt(c.report.hit_ratio) << ',' << fmt(c.report.retrieval_time_per_image_s) << ','
            << c.report.bytes_prefetched << ',' << fmt(c.report.prefetch_precision) << ','
            << c.report.evictions << '\n';
    }
}

inline std::vector<ExperimentRow> read_experiment_csv(std::istream& in,
                                                      const std::string& source = "<csv>") {
    using namespace report_detail;
    std::string line;
    size_t lineno = 0;
    if (!std::getline(in, line) || line != kExperimentCsvHeader)
        throw ParseError(source, 1, "missing or unexpected experiment CSV header");
    ++lineno;
    std::vector<ExperimentRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 8)
            throw ParseError(source, lineno, "expected 8 fields, got " +
                                                 std::to_string(fields.size()));
        ExperimentRow r;
        r.cache_fraction = parse_double(fields[0], source, lineno);
        r.config = int(parse_double(fields[1], source, lineno));
        r.repetition = int(parse_double(fields[2], source, lineno));
        r.hit_ratio = parse_double(fields[3], source, lineno);
        r.retrieval_time_per_image_s = parse_double(fields[4], source, lineno);
        r.bytes_prefetched = uint64_t(parse_double(fields[5], source, lineno));
        r.prefetch_precision = parse_double(fields[6], source, lineno);
        r.evictions = uint64_t(parse_double(fields[7], source, lineno));
        if (r.config != 1 && r.config != 2)
            throw ParseError(source, lineno, "config must be 1 or 2");
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError(source, lineno, "experiment CSV has no data rows");
    return rows;
}

// ---------------------------------------------------------------------------
// Aggregation: mean and sample stddev per (cache fraction, config) cell.
// ---------------------------------------------------------------------------

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0; // sample stddev; 0 for a single observation
    size_t n = 0;
};

inline MetricStats metric_stats(const std::vector<double>& values) {
    MetricStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / double(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / double(s.n - 1));
    }
    return s;
}

struct AggregateCell {
    MetricStats hit_ratio;
    MetricStats retrieval_time_per_image_s;
    MetricStats bytes_prefetched;
    MetricStats prefetch_precision;
    MetricStats evictions;
};

// Keyed by (cache_fraction, config); ordered, so emitted tables are sorted.
using AggregateTable = std::map<std::pair<double, int>, AggregateCell>;

inline AggregateTable aggregate(const std::vector<ExperimentRow>& rows) {
    std::map<std::pair<double, int>, std::vector<ExperimentRow>> groups;
    for (const ExperimentRow& r : rows) groups[{r.cache_fraction, r.config}].push_back(r);
    AggregateTable table;
    for (const auto& [key, group] : groups) {
        auto collect = [&](auto&& get) {
            std::vector<double> v;
            v.reserve(group.size());
            for (const ExperimentRow& r : group) v.push_back(get(r));
            return metric_stats(v);
        };
        AggregateCell cell;
        cell.hit_ratio = collect([](const ExperimentRow& r) { return r.hit_ratio; });
        cell.retrieval_time_per_image_s =
            collect([](const ExperimentRow& r) { return r.retrieval_time_per_image_s; });
        cell.bytes_prefetched =
            collect([](const ExperimentRow& r) { return double(r.bytes_prefetched); });
        cell.prefetch_precision =
            collect([](const ExperimentRow& r) { return r.prefetch_precision; });
        cell.evictions = collect([](const ExperimentRow& r) { return double(r.evictions); });
        table[key] = cell;
    }
    return table;
}

inline nlohmann::ordered_json summary_json(const AggregateTable& table) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& [key, cell] : table) {
        nlohmann::ordered_json j;
        j["cache_fraction"] = key.first;
        j["config"] = key.second;
        j["n"] = cell.hit_ratio.n;
        auto stats = [](const MetricStats& s) {
            nlohmann::ordered_json m;
            m["mean"] = s.mean;
            m["stddev"] = s.stddev;
            return m;
        };
        j["hit_ratio"] = stats(cell.hit_ratio);
        j["retrieval_time_per_image_s"] = stats(cell.retrieval_time_per_image_s);
        j["bytes_prefetched"] = stats(cell.bytes_prefetched);
        j["prefetch_precision"] = stats(cell.prefetch_precision);
        j["evictions"] = stats(cell.evictions);
        cells.push_back(std::move(j));
    }
    nlohmann::ordered_json root;
    root["cells"] = std::move(cells);
    return root;
}

// Wide per-fraction table for one metric, both configurations side by side.
// Fractions missing a configuration leave its columns empty.
inline void write_metric_table(std::ostream& out, const AggregateTable& table,
                               MetricStats AggregateCell::* metric) {
    using report_detail::fmt;
    out << "cache_fraction,config1_mean,config1_stddev,config2_mean,config2_stddev\n";
    std::map<double, std::array<const AggregateCell*, 2>> by_fraction;
    for (const auto& [key, cell] : table)
        by_fraction[key.first][size_t(key.second - 1)] = &cell;
    for (const auto& [fraction, configs] : by_fraction) {
        out << fmt(fraction);
        for (const AggregateCell* cell : configs) {
            if (cell)
                out << ',' << fmt((cell->*metric).mean) << ',' << fmt((cell->*metric).stddev);
            else
                out << ",,";
        }
        out << '\n';
    }
}

inline void write_hit_ratio_table(std::ostream& out, const AggregateTable& table) {
    write_metric_table(out, table, &AggregateCell::hit_ratio);
}

inline void write_retrieval_time_table(std::ostream& out, const AggregateTable& table) {
    write_metric_table(out, table, &AggregateCell::retrieval_time_per_image_s);
}

} // namespace migsim
