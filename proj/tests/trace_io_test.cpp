// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.

#include "migsim/trace_io.hpp"

#include <sstream>

#include "doctest.h"
#include "migsim/rng.hpp"

using namespace migsim;

namespace {

StudyRecord sample_record(int i) {
    StudyRecord r;
    r.study_uid = "S" + std::to_string(i);
    r.patient_id = "P" + std::to_string(i % 13);
    r.patient_sex = i % 2 ? Sex::M : Sex::F;
    r.patient_birth_date = CivilDate{1950 + i % 50, 1 + unsigned(i % 12), 1 + unsigned(i % 28)};
    r.modality = Modality{i % 3 ? "CT" : "MR"};
    r.body_part = BodyPart{i % 2 ? "CHEST" : "HEAD"};
    r.institution = "INST_" + std::string(1, char('A' + i % 3));
    r.study_date = CivilDate::from_days(17167 + i);
    r.size_bytes = uint64_t(1000 + i * 37);
    r.num_images = uint32_t(1 + i % 9);
    return r;
}

bool same_record(const StudyRecord& a, const StudyRecord& b) {
    return a.study_uid == b.study_uid && a.patient_id == b.patient_id &&
           a.patient_sex == b.patient_sex && a.patient_birth_date == b.patient_birth_date &&
           a.modality == b.modality && a.body_part == b.body_part &&
           a.institution == b.institution && a.study_date == b.study_date &&
           a.size_bytes == b.size_bytes && a.num_images == b.num_images;
}

bool same_event(const TraceEvent& a, const TraceEvent& b) {
    if (a.ts != b.ts || a.aetitle != b.aetitle || a.kind != b.kind) return false;
    if (a.study_uid != b.study_uid || a.query_id != b.query_id) return false;
    if (a.query.has_value() != b.query.has_value()) return false;
    if (a.query) return to_json(*a.query) == to_json(*b.query);
    return true;
}

} // namespace

TEST_CASE("query specs round-trip through json including date ranges") {
    QuerySpec q;
    q.patient_id = "P7";
    q.modality = Modality{"US"};
    q.study_date_range = DateRange{CivilDate{2017, 2, 1}, CivilDate{2017, 3, 1}};
    q.body_part = BodyPart{"NECK"};
    q.institution = "INST_B";
    QuerySpec back = query_spec_from_json(to_json(q));
    CHECK(to_json(back) == to_json(q));

    json j = to_json(q);
    CHECK(j["study_date_range"][0] == "2017-02-01");
    CHECK(j["study_date_range"][1] == "2017-03-01");
}

TEST_CASE("unknown query keys and malformed ranges are rejected") {
    CHECK_THROWS_AS(query_spec_from_json(json::parse(R"({"patient":"P1"})")), ParseError);
    CHECK_THROWS_AS(query_spec_from_json(json::parse(R"({"study_date_range":"2017-01-01"})")),
                    ParseError);
    CHECK_THROWS_AS(
        query_spec_from_json(json::parse(R"({"study_date_range":["2017-01-01"]})")), ParseError);
    // Empty specs fail domain validation even when the json itself is fine.
    CHECK_THROWS_AS(query_spec_from_json(json::parse("{}")), ConfigError);
}

TEST_CASE("trace events serialize to the wire shape") {
    QuerySpec q;
    q.patient_id = "P12";
    json jf = to_json(TraceEvent::make_query(1500000000, "WS1", q));
    CHECK(jf["ts"] == 1500000000);
    CHECK(jf["ae"] == "WS1");
    CHECK(jf["kind"] == "find");
    CHECK(jf["q"]["patient_id"] == "P12");

    json jm = to_json(TraceEvent::make_retrieve(1500000060, "WS2", "S345", 17));
    CHECK(jm["kind"] == "move");
    CHECK(jm["uid"] == "S345");
    CHECK(jm["qid"] == 17);

    json jm2 = to_json(TraceEvent::make_retrieve(1500000061, "WS2", "S346"));
    CHECK_FALSE(jm2.contains("qid"));
    TraceEvent back = trace_event_from_json(jm2);
    CHECK_FALSE(back.query_id.has_value());

    CHECK_THROWS_AS(trace_event_from_json(json::parse(R"({"ts":1,"ae":"W","kind":"push"})")),
                    ParseError);
}

TEST_CASE("traces of mixed events round-trip losslessly") {
    Rng rng(99);
    std::vector<TraceEvent> events;
    for (int i = 0; i < 1000; ++i) {
        int64_t ts = 1500000000 + i * 11;
        if (rng.bernoulli(0.3)) {
            QuerySpec q;
            if (rng.bernoulli(0.5)) q.patient_id = "P" + std::to_string(i % 40);
            if (rng.bernoulli(0.4)) q.modality = Modality{"CT"};
            if (q.empty())
                q.study_date_range = DateRange{CivilDate{2017, 1, 1}, CivilDate{2017, 6, 1}};
            events.push_back(TraceEvent::make_query(ts, "WS" + std::to_string(i % 3), q));
        } else {
            std::optional<int64_t> qid;
            if (rng.bernoulli(0.8)) qid = i / 4;
            events.push_back(
                TraceEvent::make_retrieve(ts, "WS" + std::to_string(i % 3),
                                          "S" + std::to_string(i % 100), qid));
        }
    }

    std::ostringstream out;
    write_trace(out, events);
    std::istringstream in(out.str());
    auto back = read_trace(in, "buffer");
    REQUIRE(back.size() == events.size());
    for (size_t i = 0; i < events.size(); ++i) CHECK(same_event(events[i], back[i]));

    // A second serialization pass is byte-identical.
    std::ostringstream out2;
    write_trace(out2, back);
    CHECK(out.str() == out2.str());
}

TEST_CASE("study records and whole indexes round-trip") {
    RepositoryIndex idx;
    for (int i = 0; i < 60; ++i) {
        StudyRecord r = sample_record(i);
        CHECK(same_record(r, study_record_from_json(to_json(r))));
        idx.add(r);
    }
    std::ostringstream out;
    write_index(out, idx);
    std::istringstream in(out.str());
    RepositoryIndex back = read_index(in, "buffer");
    CHECK(back.size() == idx.size());
    CHECK(back.total_bytes() == idx.total_bytes());
    for (const auto& [uid, r] : idx.records()) CHECK(same_record(r, back.at(uid)));
}

TEST_CASE("parse errors cite the source and 1-based line number") {
    std::string text;
    for (int i = 0; i < 6; ++i)
        text += to_json(TraceEvent::make_retrieve(100 + i, "WS1", "S1")).dump() + "\n";
    text += "this is not json\n";

    std::istringstream in(text);
    try {
        read_trace(in, "bad.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("bad.jsonl") != std::string::npos);
        CHECK(msg.find(":7:") != std::string::npos);
    }

    // Valid json with a bad payload also carries the line.
    std::istringstream in2(R"({"ts":1,"ae":"W","kind":"move","uid":"S1"}
{"ts":2,"ae":"W","kind":"find","q":{"bogus_key":"x"}}
)");
    try {
        read_trace(in2, "bad2.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("bad2.jsonl:2:") != std::string::npos);
        CHECK(msg.find("bogus_key") != std::string::npos);
    }
}

TEST_CASE("empty and blank-line inputs parse to empty sequences") {
    std::istringstream empty("");
    CHECK(read_trace(empty, "empty").empty());
    std::istringstream blanks("\n\n");
    CHECK(read_trace(blanks, "blanks").empty());
    std::istringstream eidx("");
    CHECK(read_index(eidx, "empty").size() == 0);
}

TEST_CASE("session labels round-trip and reject bad classes") {
    std::vector<SessionLabel> labels = {{0, UsagePattern::PatientRevising},
                                        {1, UsagePattern::Other},
                                        {2, UsagePattern::InconsequentQuery}};
    std::ostringstream out;
    write_labels(out, labels);
    std::istringstream in(out.str());
    auto back = read_labels(in, "labels");
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back[i].qid == labels[i].qid);
        CHECK(back[i].cls == labels[i].cls);
    }
    std::istringstream bad(R"({"qid":0,"class":5})");
    CHECK_THROWS_AS(read_labels(bad, "labels"), ParseError);
}

TEST_CASE("training log records round-trip with their feature vectors") {
    std::vector<TrainingLogRecord> recs;
    recs.push_back({4, {0.0, 0.25, 1.0}, 2});
    recs.push_back({9, {0.5}, 4});
    std::ostringstream out;
    write_training_log(out, recs);
    std::istringstream in(out.str());
    auto back = read_training_log(in, "log");
    REQUIRE(back.size() == 2);
    CHECK(back[0].qid == 4);
    CHECK(back[0].features == std::vector<double>{0.0, 0.25, 1.0});
    CHECK(back[0].label == 2);
    CHECK(back[1].label == 4);

    std::istringstream bad(R"({"qid":1,"features":[0.1],"label":0})");
    CHECK_THROWS_AS(read_training_log(bad, "log"), ParseError);
}
