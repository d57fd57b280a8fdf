// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.

#include "migsim/sensors.hpp"

#include "doctest.h"
#include "migsim/rng.hpp"

using namespace migsim;

TEST_CASE("sensor config validates its bounds") {
    CHECK_NOTHROW(SensorConfig{}.validate());
    CHECK_THROWS_AS((SensorConfig{0.0, 0.3}.validate()), ConfigError);
    CHECK_THROWS_AS((SensorConfig{600.0, 1.5}.validate()), ConfigError);
    CHECK_THROWS_AS((SensorConfig{600.0, -0.1}.validate()), ConfigError);
}

TEST_CASE("busy log merges touching and overlapping intervals") {
    BusyLog log;
    log.add_busy(0.0, 10.0);
    log.add_busy(10.0, 20.0); // touching: merged
    CHECK(log.interval_count() == 1);
    log.add_busy(30.0, 40.0);
    CHECK(log.interval_count() == 2);
    log.add_busy(35.0, 50.0); // overlapping: merged backwards
    CHECK(log.interval_count() == 2);
    CHECK(log.busy_seconds_in(0.0, 50.0) == doctest::Approx(40.0));
    log.add_busy(5.0, 5.0); // empty: ignored
    CHECK(log.interval_count() == 2);
    log.add_busy(15.0, 32.0); // out of order, spans the gap: everything merges
    CHECK(log.interval_count() == 1);
    CHECK(log.busy_seconds_in(0.0, 50.0) == doctest::Approx(50.0));
}

TEST_CASE("busy time clips to the requested window") {
    BusyLog log;
    log.add_busy(100.0, 200.0);
    CHECK(log.busy_seconds_in(0.0, 100.0) == 0.0);
    CHECK(log.busy_seconds_in(200.0, 300.0) == 0.0);
    CHECK(log.busy_seconds_in(150.0, 250.0) == doctest::Approx(50.0));
    CHECK(log.busy_seconds_in(50.0, 150.0) == doctest::Approx(50.0));
    CHECK(log.busy_seconds_in(120.0, 180.0) == doctest::Approx(60.0));
    CHECK(log.busy_seconds_in(300.0, 250.0) == 0.0); // inverted window
}

TEST_CASE("utilization covers the idle, saturated, and half-busy cases") {
    BusyLog idle;
    CHECK(network_utilization(idle, 1000.0, 600.0) == 0.0);

    BusyLog full;
    full.add_busy(400.0, 1000.0);
    CHECK(network_utilization(full, 1000.0, 600.0) == 1.0);

    BusyLog half;
    half.add_busy(700.0, 1000.0);
    CHECK(network_utilization(half, 1000.0, 600.0) == doctest::Approx(0.5));

    CHECK_THROWS_AS(network_utilization(idle, 1000.0, 0.0), ConfigError);
}

TEST_CASE("idleness is a strict comparison against the threshold") {
    CHECK(is_idle(0.0, 0.3));
    CHECK(is_idle(0.29, 0.3));
    CHECK_FALSE(is_idle(0.3, 0.3)); // equal is not idle
    CHECK_FALSE(is_idle(0.9, 0.3));
}

TEST_CASE("adding busy time inside the window never lowers utilization") {
    Rng rng(4242);
    for (int run = 0; run < 50; ++run) {
        BusyLog log;
        double now = 10000.0, window = 600.0;
        double prev = 0.0;
        double t = now - window;
        for (int i = 0; i < 30; ++i) {
            double start = t + rng.uniform(0.0, 15.0);
            double end = start + rng.uniform(0.0, 20.0);
            t = end;
            if (end > now) break;
            log.add_busy(start, end);
            double u = network_utilization(log, now, window);
            CHECK(u >= prev - 1e-12);
            CHECK(u >= 0.0);
            CHECK(u <= 1.0);
            prev = u;
        }
    }
}

TEST_CASE("message sensor records mirror the triggering event") {
    QuerySpec q;
    q.modality = Modality{"CT"};
    std::vector<std::string> matches = {"S1", "S9"};
    MessageLogRecord find =
        message_sensor_record(TraceEvent::make_query(500, "WS2", q), &matches);
    CHECK(find.kind == "find");
    CHECK(find.source == "WS2");
    CHECK(find.destination == "GATEWAY");
    CHECK(find.matches == matches);
    auto jf = find.to_json();
    CHECK(jf["kind"] == "find");
    CHECK(jf["q"]["modality"] == "CT");
    CHECK(jf["matches"] == nlohmann::ordered_json::array({"S1", "S9"}));

    MessageLogRecord move =
        message_sensor_record(TraceEvent::make_retrieve(600, "WS1", "S7", 4));
    CHECK(move.kind == "move");
    CHECK(move.study_uid == "S7");
    auto jm = move.to_json();
    CHECK(jm["uid"] == "S7");
    CHECK_FALSE(jm.contains("matches"));
    CHECK_FALSE(jm.contains("q"));
}

TEST_CASE("study sensor lookup resolves uids or names the missing one") {
    RepositoryIndex idx;
    StudyRecord r;
    r.study_uid = "S1";
    r.patient_id = "P1";
    r.patient_birth_date = CivilDate{1970, 1, 1};
    r.modality = Modality{"CT"};
    r.body_part = BodyPart{"CHEST"};
    r.institution = "INST_A";
    r.study_date = CivilDate{2017, 1, 1};
    r.size_bytes = 10;
    r.num_images = 1;
    idx.add(r);
    CHECK(study_sensor_lookup(idx, "S1").patient_id == "P1");
    CHECK_THROWS_AS(study_sensor_lookup(idx, "S404"), NotFoundError);
}
