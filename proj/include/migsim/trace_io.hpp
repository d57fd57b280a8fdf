// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "migsim/domain.hpp"
#include "migsim/errors.hpp"

namespace migsim {

// ordered_json keeps insertion order so emitted records read naturally
// (ts first) and files are byte-stable for a given input.
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// JSON <-> domain value conversions.
// ---------------------------------------------------------------------------

inline json to_json(const QuerySpec& q) {
    json j = json::object();
    if (q.patient_id) j["patient_id"] = *q.patient_id;
    if (q.modality) j["modality"] = q.modality->token();
    if (q.study_date_range)
        j["study_date_range"] = {q.study_date_range->from.to_string(),
                                 q.study_date_range->to.to_string()};
    if (q.body_part) j["body_part"] = q.body_part->token();
    if (q.institution) j["institution"] = *q.institution;
    return j;
}

inline QuerySpec query_spec_from_json(const json& j) {
    QuerySpec q;
    for (const auto& [key, value] : j.items()) {
        if (key == "patient_id") q.patient_id = value.get<std::string>();
        else if (key == "modality") q.modality = Modality(value.get<std::string>());
        else if (key == "body_part") q.body_part = BodyPart(value.get<std::string>());
        else if (key == "institution") q.institution = value.get<std::string>();
        else if (key == "study_date_range") {
            if (!value.is_array() || value.size() != 2)
                throw ParseError("study_date_range must be a [from, to] pair");
            q.study_date_range = DateRange{CivilDate::parse(value[0].get<std::string>()),
                                           CivilDate::parse(value[1].get<std::string>())};
        } else {
            throw ParseError("unknown query key '" + key + "'");
        }
    }
    q.validate();
    return q;
}

inline json to_json(const TraceEvent& e) {
    json j;
    j["ts"] = e.ts;
    j["ae"] = e.aetitle;
    if (e.kind == EventKind::Query) {
        j["kind"] = "find";
        j["q"] = to_json(*e.query);
    } else {
        j["kind"] = "move";
        j["uid"] = *e.study_uid;
        if (e.query_id) j["qid"] = *e.query_id;
    }
    return j;
}

inline TraceEvent trace_event_from_json(const json& j) {
    int64_t ts = j.at("ts").get<int64_t>();
    std::string ae = j.at("ae").get<std::string>();
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "find")
        return TraceEvent::make_query(ts, std::move(ae), query_spec_from_json(j.at("q")));
    if (kind == "move") {
        std::optional<int64_t> qid;
        if (j.contains("qid")) qid = j.at("qid").get<int64_t>();
        return TraceEvent::make_retrieve(ts, std::move(ae), j.at("uid").get<std::string>(), qid);
    }
    throw ParseError("unknown event kind '" + kind + "'");
}

inline json to_json(const StudyRecord& r) {
    json j;
    j["study_uid"] = r.study_uid;
    j["patient_id"] = r.patient_id;
    j["patient_sex"] = to_string(r.patient_sex);
    j["patient_birth_date"] = r.patient_birth_date.to_string();
    j["modality"] = r.modality.token();
    j["body_part"] = r.body_part.token();
    j["institution"] = r.institution;
    j["study_date"] = r.study_date.to_string();
    j["size_bytes"] = r.size_bytes;
    j["num_images"] = r.num_images;
    return j;
}

inline StudyRecord study_record_from_json(const json& j) {
    StudyRecord r;
    r.study_uid = j.at("study_uid").get<std::string>();
    r.patient_id = j.at("patient_id").get<std::string>();
    r.patient_sex = parse_sex(j.at("patient_sex").get<std::string>());
    r.patient_birth_date = CivilDate::parse(j.at("patient_birth_date").get<std::string>());
    r.modality = Modality(j.at("modality").get<std::string>());
    r.body_part = BodyPart(j.at("body_part").get<std::string>());
    r.institution = j.at("institution").get<std::string>();
    r.study_date = CivilDate::parse(j.at("study_date").get<std::string>());
    r.size_bytes = j.at("size_bytes").get<uint64_t>();
    r.num_images = j.at("num_images").get<uint32_t>();
    r.validate();
    return r;
}

// ---------------------------------------------------------------------------
// JSON Lines streams. Parse errors carry the source name and 1-based line.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
void for_each_jsonl(std::istream& in, const std::string& source, Fn&& fn) {
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, lineno, e.what());
        }
        try {
            fn(j);
        } catch (const ParseError& e) {
            throw ParseError(source, lineno, e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, lineno, e.what());
        } catch (const std::exception& e) {
            throw ParseError(source, lineno, e.what());
        }
    }
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    return out;
}

} // namespace detail

inline std::vector<TraceEvent> read_trace(std::istream& in, const std::string& source = "<trace>") {
    std::vector<TraceEvent> events;
    detail::for_each_jsonl(in, source, [&](const json& j) {
        events.push_back(trace_event_from_json(j));
    });
    return events;
}

inline std::vector<TraceEvent> read_trace_file(const std::string& path) {
    auto in = detail::open_input(path);
    return read_trace(in, path);
}

inline void write_trace(std::ostream& out, const std::vector<TraceEvent>& events) {
    for (const auto& e : events) out << to_json(e).dump() << '\n';
}

inline void write_trace_file(const std::string& path, const std::vector<TraceEvent>& events) {
    auto out = detail::open_output(path);
    write_trace(out, events);
}

inline RepositoryIndex read_index(std::istream& in, const std::string& source = "<index>") {
    RepositoryIndex index;
    detail::for_each_jsonl(in, source, [&](const json& j) {
        index.add(study_record_from_json(j));
    });
    return index;
}

inline RepositoryIndex read_index_file(const std::string& path) {
    auto in = detail::open_input(path);
    return read_index(in, path);
}

inline void write_index(std::ostream& out, const RepositoryIndex& index) {
    for (const auto& [uid, record] : index.records()) out << to_json(record).dump() << '\n';
}

inline void write_index_file(const std::string& path, const RepositoryIndex& index) {
    auto out = detail::open_output(path);
    write_index(out, index);
}

// Ground-truth labels for query sessions, keyed by query ordinal. The qid of
// the N-th query event in a trace (counting from 0, retrieves skipped) is N.
struct SessionLabel {
    int64_t qid = 0;
    UsagePattern cls = UsagePattern::InconsequentQuery;
};

inline std::vector<SessionLabel> read_labels(std::istream& in,
                                             const std::string& source = "<labels>") {
    std::vector<SessionLabel> labels;
    detail::for_each_jsonl(in, source, [&](const json& j) {
        labels.push_back({j.at("qid").get<int64_t>(),
                          usage_pattern_from_index(j.at("class").get<int>())});
    });
    return labels;
}

inline std::vector<SessionLabel> read_labels_file(const std::string& path) {
    auto in = detail::open_input(path);
    return read_labels(in, path);
}

inline void write_labels(std::ostream& out, const std::vector<SessionLabel>& labels) {
    for (const auto& l : labels) {
        json j;
        j["qid"] = l.qid;
        j["class"] = index_of(l.cls);
        out << j.dump() << '\n';
    }
}

inline void write_labels_file(const std::string& path, const std::vector<SessionLabel>& labels) {
    auto out = detail::open_output(path);
    write_labels(out, labels);
}

// One labelled feature vector as logged at end of day for model training.
struct TrainingLogRecord {
    int64_t qid = 0;
    std::vector<double> features;
    int label = 0; // 1..4
};

inline void write_training_log(std::ostream& out, const std::vector<TrainingLogRecord>& records) {
    for (const auto& r : records) {
        json j;
        j["qid"] = r.qid;
        j["features"] = r.features;
        j["label"] = r.label;
        out << j.dump() << '\n';
    }
}

inline std::vector<TrainingLogRecord> read_training_log(std::istream& in,
                                                        const std::string& source = "<log>") {
    std::vector<TrainingLogRecord> records;
    detail::for_each_jsonl(in, source, [&](const json& j) {
        TrainingLogRecord r;
        r.qid = j.at("qid").get<int64_t>();
        r.features = j.at("features").get<std::vector<double>>();
        r.label = j.at("label").get<int>();
        if (r.label < 1 || r.label > 4)
            throw ParseError("label out of range: " + std::to_string(r.label));
        records.push_back(std::move(r));
    });
    return records;
}

} // namespace migsim
