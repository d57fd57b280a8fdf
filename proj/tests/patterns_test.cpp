// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.

#include "migsim/patterns.hpp"

#include <cmath>

#include "doctest.h"
#include "migsim/rng.hpp"

using namespace migsim;

namespace {

StudyRecord study(std::string uid, std::string patient, std::string modality) {
    StudyRecord r;
    r.study_uid = std::move(uid);
    r.patient_id = std::move(patient);
    r.patient_sex = Sex::F;
    r.patient_birth_date = CivilDate{1960, 5, 5};
    r.modality = Modality{modality};
    r.body_part = BodyPart{"CHEST"};
    r.institution = "INST_A";
    r.study_date = CivilDate{2017, 1, 10};
    r.size_bytes = 1000;
    r.num_images = 2;
    return r;
}

TraceEvent query_at(int64_t ts, std::string ae) {
    QuerySpec q;
    q.patient_id = "P1";
    return TraceEvent::make_query(ts, std::move(ae), q);
}

} // namespace

TEST_CASE("retrieves attach to the most recent prior query within the window") {
    std::vector<TraceEvent> events = {
        TraceEvent::make_retrieve(50, "WS1", "S1"), // before any query: orphan
        query_at(100, "WS1"),
        TraceEvent::make_retrieve(100, "WS1", "S1"),  // at query ts: attached
        TraceEvent::make_retrieve(3699, "WS1", "S2"), // inside window
        TraceEvent::make_retrieve(3700, "WS1", "S3"), // exactly ts+window: out
        query_at(4000, "WS1"),
        TraceEvent::make_retrieve(4001, "WS1", "S4"), // belongs to second query
    };
    SessionBuildResult r = build_sessions(events, 3600);
    REQUIRE(r.sessions.size() == 2);
    CHECK(r.orphan_retrieves == 2);
    CHECK(r.sessions[0].qid == 0);
    CHECK(r.sessions[1].qid == 1);
    REQUIRE(r.sessions[0].retrieves.size() == 2);
    CHECK(r.sessions[0].retrieves[0].study_uid == "S1");
    CHECK(r.sessions[0].retrieves[1].study_uid == "S2");
    REQUIRE(r.sessions[1].retrieves.size() == 1);
    CHECK(r.sessions[1].retrieves[0].study_uid == "S4");
}

TEST_CASE("a node's next query closes its previous session") {
    std::vector<TraceEvent> events = {
        query_at(100, "WS1"),
        query_at(200, "WS1"),
        TraceEvent::make_retrieve(250, "WS1", "S1"), // within both windows
    };
    SessionBuildResult r = build_sessions(events, 3600);
    REQUIRE(r.sessions.size() == 2);
    CHECK(r.sessions[0].retrieves.empty());
    REQUIRE(r.sessions[1].retrieves.size() == 1);
}

TEST_CASE("interleaved nodes keep separate sessions") {
    std::vector<TraceEvent> events = {
        query_at(100, "WS1"),
        query_at(110, "WS2"),
        TraceEvent::make_retrieve(120, "WS2", "S2"),
        TraceEvent::make_retrieve(130, "WS1", "S1"),
        TraceEvent::make_retrieve(140, "WS2", "S3"),
    };
    SessionBuildResult r = build_sessions(events, 3600);
    REQUIRE(r.sessions.size() == 2);
    CHECK(r.orphan_retrieves == 0);
    CHECK(r.sessions[0].aetitle() == "WS1");
    CHECK(r.sessions[0].retrieves.size() == 1);
    CHECK(r.sessions[1].aetitle() == "WS2");
    CHECK(r.sessions[1].retrieves.size() == 2);
    for (const auto& s : r.sessions)
        for (const auto& e : s.retrieves) CHECK(e.aetitle == s.aetitle());
}

TEST_CASE("labelling rule matches a first-element oracle exhaustively") {
    // Universe of four studies spanning two patients and two modalities;
    // every retrieve sequence up to length four is labelled and compared
    // against an independent phrasing of the rule: no retrieves is an
    // inconsequent query; all studies on the first study's patient is
    // patient revising; two or more studies all on the first's modality is
    // modality revising; anything else is other.
    std::vector<StudyRecord> universe = {
        study("S00", "P1", "CT"),
        study("S01", "P1", "MR"),
        study("S10", "P2", "CT"),
        study("S11", "P2", "MR"),
    };
    auto oracle = [](const std::vector<const StudyRecord*>& v) {
        if (v.empty()) return UsagePattern::InconsequentQuery;
        bool same_patient = true, same_modality = true;
        for (const StudyRecord* r : v) {
            same_patient &= r->patient_id == v[0]->patient_id;
            same_modality &= r->modality == v[0]->modality;
        }
        if (same_patient) return UsagePattern::PatientRevising;
        if (v.size() >= 2 && same_modality) return UsagePattern::ModalityRevising;
        return UsagePattern::Other;
    };

    size_t cases = 0;
    for (size_t len = 0; len <= 4; ++len) {
        std::vector<size_t> pick(len, 0);
        while (true) {
            std::vector<const StudyRecord*> v;
            for (size_t i : pick) v.push_back(&universe[i]);
            UsagePattern got = label_from_records(v);
            CHECK(got == oracle(v));
            CHECK(got == label_from_records(v)); // deterministic
            CHECK(index_of(got) >= 1);
            CHECK(index_of(got) <= 4);
            ++cases;
            size_t i = 0;
            while (i < len && pick[i] == universe.size() - 1) pick[i++] = 0;
            if (i == len) break;
            ++pick[i];
        }
        if (len == 0) continue;
    }
    CHECK(cases == 1 + 4 + 16 + 64 + 256);
}

TEST_CASE("label_session resolves uids through the index") {
    RepositoryIndex idx;
    idx.add(study("S1", "P1", "CT"));
    idx.add(study("S2", "P2", "CT"));
    SessionWindow s;
    s.query = query_at(100, "WS1");
    CHECK(label_session(s, idx) == UsagePattern::InconsequentQuery);
    s.retrieves.push_back(TraceEvent::make_retrieve(110, "WS1", "S1"));
    CHECK(label_session(s, idx) == UsagePattern::PatientRevising);
    s.retrieves.push_back(TraceEvent::make_retrieve(120, "WS1", "S2"));
    CHECK(label_session(s, idx) == UsagePattern::ModalityRevising);
    s.retrieves.push_back(TraceEvent::make_retrieve(130, "WS1", "S404"));
    CHECK_THROWS_AS(label_session(s, idx), NotFoundError);
}

TEST_CASE("feature extraction produces the frozen layout") {
    SessionWindow s;
    QuerySpec q;
    q.patient_id = "P1";
    q.study_date_range = DateRange{CivilDate{2017, 2, 1}, CivilDate{2017, 3, 1}};
    int64_t ts = CivilDate{2017, 3, 15}.seconds_since_epoch() + 14 * 3600 + 30 * 60 + 7;
    s.query = TraceEvent::make_query(ts, "WS1", q);

    NodeHistory h;
    h.class_counts = {5, 0, 21, 2};
    h.last_class = UsagePattern::ModalityRevising;
    h.last_ts = ts - 3600;

    auto f = extract_features(s, h);
    REQUIRE(f.size() == kClassifierFeatureDim);
    CHECK(f[0] == doctest::Approx(14.0 / 23.0));
    CHECK(f[1] == doctest::Approx(15.0 / 31.0));
    CHECK(f[2] == doctest::Approx(3.0 / 12.0));
    CHECK(f[3] == doctest::Approx(0.25));  // 5 of a 20 cap
    CHECK(f[4] == 0.0);
    CHECK(f[5] == 1.0);                    // 21 capped at 20
    CHECK(f[6] == doctest::Approx(0.1));
    CHECK(f[7] == 0.0);
    CHECK(f[8] == 1.0);                    // last class one-hot
    CHECK(f[9] == 0.0);
    CHECK(f[10] == 0.0);
    CHECK(f[11] == doctest::Approx(std::log1p(3600.0) / std::log1p(604800.0)));
    CHECK(f[12] == 1.0);
    CHECK(f[13] == 0.0);
    CHECK(f[14] == 1.0);
    CHECK(f[15] == 0.0);
    CHECK(f[16] == 0.0);
}

TEST_CASE("feature extraction at midnight on the first of the month") {
    SessionWindow s;
    QuerySpec q;
    q.modality = Modality{"CT"};
    s.query = TraceEvent::make_query(CivilDate{2017, 1, 1}.seconds_since_epoch(), "WS1", q);
    NodeHistory fresh;
    auto f = extract_features(s, fresh);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == doctest::Approx(1.0 / 31.0));
    CHECK(f[2] == doctest::Approx(1.0 / 12.0));
    for (size_t i = 3; i <= 10; ++i) CHECK(f[i] == 0.0);
    CHECK(f[11] == 1.0); // no prior labelled query
    CHECK(f[13] == 1.0);
}

TEST_CASE("features stay inside the unit interval for random sessions") {
    Rng rng(606);
    for (int trial = 0; trial < 500; ++trial) {
        SessionWindow s;
        QuerySpec q;
        q.patient_id = "P" + std::to_string(rng.uniform_int(0, 50));
        if (rng.bernoulli(0.5)) q.modality = Modality{"MR"};
        int64_t ts = rng.uniform_int(0, 4'000'000'000LL);
        s.query = TraceEvent::make_query(ts, "WS1", q);
        NodeHistory h;
        for (auto& c : h.class_counts) c = size_t(rng.uniform_int(0, 100));
        if (rng.bernoulli(0.7)) {
            h.last_class = usage_pattern_from_index(int(rng.uniform_int(1, 4)));
            h.last_ts = ts - rng.uniform_int(0, 40 * 86400);
        }
        for (double v : extract_features(s, h)) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("classification ties keep the lowest class") {
    // A zero-weight single-layer classifier emits a uniform distribution,
    // which must resolve to class 1 with confidence 0.25.
    nlohmann::ordered_json j;
    j["layer_sizes"] = {kClassifierFeatureDim, 4};
    j["mode"] = "classifier";
    j["weights"] = {std::vector<double>(kClassifierFeatureDim * 4, 0.0)};
    j["biases"] = {std::vector<double>(4, 0.0)};
    MlpModel flat = MlpModel::from_json(j);
    Classification c = classify(flat, std::vector<double>(kClassifierFeatureDim, 0.5));
    CHECK(c.pattern == UsagePattern::PatientRevising);
    CHECK(c.confidence == doctest::Approx(0.25));

    MlpModel clf = make_classifier(44);
    Classification real = classify(clf, std::vector<double>(kClassifierFeatureDim, 0.3));
    CHECK(index_of(real.pattern) >= 1);
    CHECK(index_of(real.pattern) <= 4);
    CHECK(real.confidence >= 0.25 - 1e-12);
    CHECK(real.confidence < 1.0);

    MlpModel scorer({kClassifierFeatureDim, 1}, MlpModel::Mode::Scorer, 1);
    CHECK_THROWS_AS(classify(scorer, std::vector<double>(kClassifierFeatureDim, 0.5)),
                    DimensionError);
}

TEST_CASE("end_of_day_update labels, logs, trains, and advances histories") {
    RepositoryIndex idx;
    idx.add(study("S1", "P1", "CT"));
    idx.add(study("S2", "P2", "CT"));

    SessionWindow s1;
    s1.query = query_at(1000, "WS1");
    s1.qid = 0;
    s1.retrieves = {TraceEvent::make_retrieve(1100, "WS1", "S1")};
    SessionWindow s2;
    s2.query = query_at(5000, "WS1");
    s2.qid = 1;
    s2.retrieves = {TraceEvent::make_retrieve(5100, "WS1", "S1"),
                    TraceEvent::make_retrieve(5200, "WS1", "S2")};
    SessionWindow s3;
    s3.query = query_at(5400, "WS2");
    s3.qid = 2;

    MlpModel model = make_classifier(7);
    MlpModel before = model;
    std::map<std::string, NodeHistory> histories;
    std::vector<TrainingLogRecord> log;
    TrainParams params;
    end_of_day_update(model, {s1, s2, s3}, idx, histories, params, &log);

    REQUIRE(log.size() == 3);
    CHECK(log[0].qid == 0);
    CHECK(log[0].label == 1);
    CHECK(log[1].label == 2);
    CHECK(log[2].label == 3);
    CHECK_FALSE(model == before); // training moved the weights

    // Within one day the history evolves session by session: the second
    // WS1 record sees the first one's label in its count features.
    CHECK(log[0].features[3] == 0.0);
    CHECK(log[1].features[3] == doctest::Approx(1.0 / 20.0));
    CHECK(log[1].features[7] == 1.0);

    CHECK(histories["WS1"].class_counts[0] == 1);
    CHECK(histories["WS1"].class_counts[1] == 1);
    CHECK(histories["WS1"].last_class == UsagePattern::ModalityRevising);
    CHECK(histories["WS1"].last_ts == 5000);
    CHECK(histories["WS2"].class_counts[2] == 1);

    // An empty day is a strict no-op.
    MlpModel idle = make_classifier(7);
    MlpModel idle_before = idle;
    std::vector<TrainingLogRecord> empty_log;
    end_of_day_update(idle, {}, idx, histories, params, &empty_log);
    CHECK(idle == idle_before);
    CHECK(empty_log.empty());
}
