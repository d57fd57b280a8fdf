// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#include <doctest.h>

#include <sstream>

#include "migsim/report.hpp"

using namespace migsim;

namespace {

ExperimentCell make_cell(double fraction, int config, int rep, double hit_ratio,
                         double time_per_image, uint64_t bytes, double precision,
                         uint64_t evictions) {
    ExperimentCell c;
    c.cache_fraction = fraction;
    c.config = config;
    c.repetition = rep;
    c.report.hit_ratio = hit_ratio;
    c.report.retrieval_time_per_image_s = time_per_image;
    c.report.bytes_prefetched = bytes;
    c.report.prefetch_precision = precision;
    c.report.evictions = evictions;
    return c;
}

} // namespace

TEST_CASE("metric_stats hand-checked values") {
    // mean 5, sample variance (9 + 1 + 16) / 2 = 13
    MetricStats s = metric_stats({2.0, 4.0, 9.0});
    CHECK(s.n == 3);
    CHECK(s.mean == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.stddev == doctest::Approx(std::sqrt(13.0)).epsilon(1e-12));

    MetricStats one = metric_stats({7.5});
    CHECK(one.n == 1);
    CHECK(one.mean == 7.5);
    CHECK(one.stddev == 0.0);

    MetricStats none = metric_stats({});
    CHECK(none.n == 0);
    CHECK(none.mean == 0.0);
    CHECK(none.stddev == 0.0);

    MetricStats constant = metric_stats({3.0, 3.0, 3.0, 3.0});
    CHECK(constant.mean == 3.0);
    CHECK(constant.stddev == 0.0);
}

TEST_CASE("experiment CSV write then read round-trips") {
    // Binary fractions survive the decimal print/parse cycle exactly.
    std::vector<ExperimentCell> cells = {
        make_cell(0.01, 1, 0, 0.8125, 1.5, 0, 0.0, 12),
        make_cell(0.01, 2, 0, 0.90625, 0.25, 5000000, 0.75, 7),
        make_cell(0.05, 2, 3, 1.0, 0.0078125, 123456789, 0.5, 0),
    };
    std::ostringstream out;
    write_experiment_csv(out, cells);

    std::string text = out.str();
    CHECK(text.substr(0, std::string(kExperimentCsvHeader).size()) == kExperimentCsvHeader);

    std::istringstream in(text);
    std::vector<ExperimentRow> rows = read_experiment_csv(in, "mem.csv");
    REQUIRE(rows.size() == cells.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CAPTURE(i);
        CHECK(rows[i].cache_fraction == cells[i].cache_fraction);
        CHECK(rows[i].config == cells[i].config);
        CHECK(rows[i].repetition == cells[i].repetition);
        CHECK(rows[i].hit_ratio == cells[i].report.hit_ratio);
        CHECK(rows[i].retrieval_time_per_image_s == cells[i].report.retrieval_time_per_image_s);
        CHECK(rows[i].bytes_prefetched == cells[i].report.bytes_prefetched);
        CHECK(rows[i].prefetch_precision == cells[i].report.prefetch_precision);
        CHECK(rows[i].evictions == cells[i].report.evictions);
    }
}

TEST_CASE("experiment CSV writing is stable") {
    std::vector<ExperimentCell> cells = {make_cell(0.025, 2, 1, 0.5, 2.25, 42, 1.0, 3)};
    std::ostringstream a, b;
    write_experiment_csv(a, cells);
    write_experiment_csv(b, cells);
    CHECK(a.str() == b.str());
    CHECK(a.str() == std::string(kExperimentCsvHeader) + "\n0.025,2,1,0.5,2.25,42,1,3\n");
}

TEST_CASE("experiment CSV reader rejects malformed input") {
    SUBCASE("missing header") {
        std::istringstream in("nope\n0.01,1,0,0.5,1,0,0,0\n");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
    SUBCASE("reordered header") {
        std::istringstream in("config,cache_fraction,repetition,hit_ratio,"
                              "retrieval_time_per_image_s,bytes_prefetched,prefetch_precision,"
                              "evictions\n");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
    SUBCASE("wrong field count names the line") {
        std::istringstream in(std::string(kExperimentCsvHeader) + "\n0.01,1,0,0.5\n");
        try {
            read_experiment_csv(in, "x.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            std::string msg = e.what();
            CHECK(msg.find("x.csv") != std::string::npos);
            CHECK(msg.find(":2:") != std::string::npos);
        }
    }
    SUBCASE("non-numeric field") {
        std::istringstream in(std::string(kExperimentCsvHeader) +
                              "\n0.01,1,0,0.5,1,0,0,0\n0.01,1,1,abc,1,0,0,0\n");
        try {
            read_experiment_csv(in, "x.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            std::string msg = e.what();
            CHECK(msg.find(":3:") != std::string::npos);
            CHECK(msg.find("abc") != std::string::npos);
        }
    }
    SUBCASE("trailing junk on a numeric field") {
        std::istringstream in(std::string(kExperimentCsvHeader) + "\n0.01x,1,0,0.5,1,0,0,0\n");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
    SUBCASE("config out of range") {
        std::istringstream in(std::string(kExperimentCsvHeader) + "\n0.01,3,0,0.5,1,0,0,0\n");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
    SUBCASE("header only, no data rows") {
        std::istringstream in(std::string(kExperimentCsvHeader) + "\n");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
    SUBCASE("empty stream") {
        std::istringstream in("");
        CHECK_THROWS_AS(read_experiment_csv(in, "x.csv"), ParseError);
    }
}

TEST_CASE("experiment CSV reader skips blank lines") {
    std::istringstream in(std::string(kExperimentCsvHeader) +
                          "\n0.01,1,0,0.5,1,0,0,0\n\n0.01,2,0,0.75,0.5,100,1,2\n\n");
    std::vector<ExperimentRow> rows = read_experiment_csv(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].config == 1);
    CHECK(rows[1].config == 2);
    CHECK(rows[1].bytes_prefetched == 100);
}

TEST_CASE("aggregate computes per-cell means and sample stddev") {
    std::vector<ExperimentRow> rows;
    auto row = [](double frac, int config, int rep, double hr, double rt, uint64_t bp, double pp,
                  uint64_t ev) {
        ExperimentRow r;
        r.cache_fraction = frac;
        r.config = config;
        r.repetition = rep;
        r.hit_ratio = hr;
        r.retrieval_time_per_image_s = rt;
        r.bytes_prefetched = bp;
        r.prefetch_precision = pp;
        r.evictions = ev;
        return r;
    };
    rows.push_back(row(0.05, 2, 0, 0.5, 1.0, 100, 0.2, 10));
    rows.push_back(row(0.05, 2, 1, 0.6, 2.0, 200, 0.4, 10));
    rows.push_back(row(0.05, 2, 2, 0.7, 3.0, 600, 0.6, 10));
    rows.push_back(row(0.01, 1, 0, 0.25, 4.0, 0, 0.0, 50));

    AggregateTable table = aggregate(rows);
    REQUIRE(table.size() == 2);
    REQUIRE(table.count({0.05, 2}) == 1);
    REQUIRE(table.count({0.01, 1}) == 1);

    const AggregateCell& big = table.at({0.05, 2});
    CHECK(big.hit_ratio.n == 3);
    CHECK(big.hit_ratio.mean == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(big.hit_ratio.stddev == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(big.retrieval_time_per_image_s.mean == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(big.retrieval_time_per_image_s.stddev == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(big.bytes_prefetched.mean == doctest::Approx(300.0).epsilon(1e-12));
    // squared deviations 200^2 + 100^2 + 300^2 over n-1 = 2
    CHECK(big.bytes_prefetched.stddev == doctest::Approx(std::sqrt(70000.0)).epsilon(1e-9));
    CHECK(big.prefetch_precision.mean == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(big.evictions.mean == 10.0);
    CHECK(big.evictions.stddev == 0.0);

    const AggregateCell& single = table.at({0.01, 1});
    CHECK(single.hit_ratio.n == 1);
    CHECK(single.hit_ratio.mean == 0.25);
    CHECK(single.hit_ratio.stddev == 0.0);
    CHECK(single.evictions.mean == 50.0);
}

TEST_CASE("aggregate table iterates fractions then configs in order") {
    std::vector<ExperimentRow> rows;
    ExperimentRow r;
    for (double frac : {0.05, 0.01}) {
        for (int config : {2, 1}) {
            r.cache_fraction = frac;
            r.config = config;
            rows.push_back(r);
        }
    }
    AggregateTable table = aggregate(rows);
    std::vector<std::pair<double, int>> keys;
    for (const auto& [key, cell] : table) keys.push_back(key);
    REQUIRE(keys.size() == 4);
    CHECK(keys[0] == std::pair<double, int>{0.01, 1});
    CHECK(keys[1] == std::pair<double, int>{0.01, 2});
    CHECK(keys[2] == std::pair<double, int>{0.05, 1});
    CHECK(keys[3] == std::pair<double, int>{0.05, 2});
}

TEST_CASE("summary_json exposes every metric per cell") {
    std::vector<ExperimentRow> rows;
    ExperimentRow r;
    r.cache_fraction = 0.01;
    r.config = 1;
    r.hit_ratio = 0.5;
    r.retrieval_time_per_image_s = 2.0;
    rows.push_back(r);
    r.repetition = 1;
    r.hit_ratio = 0.7;
    rows.push_back(r);

    nlohmann::ordered_json j = summary_json(aggregate(rows));
    REQUIRE(j.contains("cells"));
    REQUIRE(j["cells"].is_array());
    REQUIRE(j["cells"].size() == 1);
    const auto& cell = j["cells"][0];
    CHECK(cell["cache_fraction"] == 0.01);
    CHECK(cell["config"] == 1);
    CHECK(cell["n"] == 2);
    CHECK(cell["hit_ratio"]["mean"].get<double>() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(cell["hit_ratio"]["stddev"].get<double>() ==
          doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
    CHECK(cell["retrieval_time_per_image_s"]["mean"].get<double>() == 2.0);
    CHECK(cell["retrieval_time_per_image_s"]["stddev"].get<double>() == 0.0);
    for (const char* metric : {"hit_ratio", "retrieval_time_per_image_s", "bytes_prefetched",
                               "prefetch_precision", "evictions"}) {
        CAPTURE(metric);
        REQUIRE(cell.contains(metric));
        CHECK(cell[metric].contains("mean"));
        CHECK(cell[metric].contains("stddev"));
    }
}

TEST_CASE("wide metric tables pair configs per fraction") {
    std::vector<ExperimentRow> rows;
    auto row = [](double frac, int config, double hr, double rt) {
        ExperimentRow r;
        r.cache_fraction = frac;
        r.config = config;
        r.hit_ratio = hr;
        r.retrieval_time_per_image_s = rt;
        return r;
    };
    rows.push_back(row(0.01, 1, 0.25, 4.0));
    rows.push_back(row(0.01, 2, 0.5, 2.0));
    rows.push_back(row(0.05, 1, 0.75, 1.0)); // no config 2 at this fraction

    AggregateTable table = aggregate(rows);

    std::ostringstream hit;
    write_hit_ratio_table(hit, table);
    CHECK(hit.str() ==
          "cache_fraction,config1_mean,config1_stddev,config2_mean,config2_stddev\n"
          "0.01,0.25,0,0.5,0\n"
          "0.05,0.75,0,,\n");

    std::ostringstream rt;
    write_retrieval_time_table(rt, table);
    CHECK(rt.str() ==
          "cache_fraction,config1_mean,config1_stddev,config2_mean,config2_stddev\n"
          "0.01,4,0,2,0\n"
          "0.05,1,0,,\n");
}

TEST_CASE("wide table handles a config-2-only fraction") {
    std::vector<ExperimentRow> rows;
    ExperimentRow r;
    r.cache_fraction = 0.025;
    r.config = 2;
    r.hit_ratio = 0.625;
    rows.push_back(r);
    std::ostringstream out;
    write_hit_ratio_table(out, aggregate(rows));
    CHECK(out.str() ==
          "cache_fraction,config1_mean,config1_stddev,config2_mean,config2_stddev\n"
          "0.025,,,0.625,0\n");
}
