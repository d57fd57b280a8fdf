// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "migsim/domain.hpp"
#include "migsim/mlp.hpp"
#include "migsim/trace_io.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Sessions: one query plus the retrieves attributed to it.
// ---------------------------------------------------------------------------

struct SessionWindow {
    TraceEvent query;
    std::vector<TraceEvent> retrieves;
    int64_t qid = 0;            // ordinal of the query within the whole trace
    int64_t window_seconds = 3600;

    const std::string& aetitle() const { return query.aetitle; }
};

struct SessionBuildResult {
    std::vector<SessionWindow> sessions; // trace order of their queries
    size_t orphan_retrieves = 0;         // retrieves with no attributable query
};

// Attributes each retrieve to the most recent prior query from the same
// node, provided it falls inside that query's attribution window and before
// the node's next query. Nodes interleave freely in the input.
inline SessionBuildResult build_sessions(const std::vector<TraceEvent>& events,
                                         int64_t window_seconds = 3600) {
    SessionBuildResult out;
    std::map<std::string, size_t> open; // aetitle -> index into out.sessions
    int64_t next_qid = 0;
    for (const TraceEvent& e : events) {
        if (e.kind == EventKind::Query) {
            SessionWindow s;
            s.query = e;
            s.qid = next_qid++;
            s.window_seconds = window_seconds;
            open[e.aetitle] = out.sessions.size();
            out.sessions.push_back(std::move(s));
        } else {
            auto it = open.find(e.aetitle);
            if (it == open.end()) {
                ++out.orphan_retrieves;
                continue;
            }
            SessionWindow& s = out.sessions[it->second];
            if (e.ts >= s.query.ts && e.ts < s.query.ts + window_seconds)
                s.retrieves.push_back(e);
            else
                ++out.orphan_retrieves;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic labelling rule for completed sessions.
// ---------------------------------------------------------------------------

// Rule over the retrieved studies' metadata:
//   no retrieves                                      -> InconsequentQuery
//   all retrieves share one patient                   -> PatientRevising
//   >= 2 retrieves, one modality, >= 2 patients       -> ModalityRevising
//   anything else                                     -> Other
// A single retrieve always lands in PatientRevising (one study has one
// patient), which resolves the overlap between the first two classes.
inline UsagePattern label_from_records(const std::vector<const StudyRecord*>& studies) {
    if (studies.empty()) return UsagePattern::InconsequentQuery;
    std::set<std::string> patients;
    std::set<std::string> modalities;
    for (const StudyRecord* r : studies) {
        patients.insert(r->patient_id);
        modalities.insert(r->modality.token());
    }
    if (patients.size() == 1) return UsagePattern::PatientRevising;
    if (studies.size() >= 2 && modalities.size() == 1) return UsagePattern::ModalityRevising;
    return UsagePattern::Other;
}

inline UsagePattern label_session(const SessionWindow& s, const RepositoryIndex& index) {
    std::vector<const StudyRecord*> studies;
    studies.reserve(s.retrieves.size());
    for (const TraceEvent& e : s.retrieves) studies.push_back(&index.at(*e.study_uid));
    return label_from_records(studies);
}

// ---------------------------------------------------------------------------
// Feature extraction.
// ---------------------------------------------------------------------------

// Per-node labelling history. Mutated only when a day's sessions are
// labelled, so live classification during a day sees the state as of the
// previous midnight.
struct NodeHistory {
    std::array<size_t, 4> class_counts{}; // indexed by class - 1
    std::optional<UsagePattern> last_class;
    std::optional<int64_t> last_ts;

    void record(UsagePattern label, int64_t ts) {
        ++class_counts[size_t(index_of(label)) - 1];
        last_class = label;
        last_ts = ts;
    }
};

// Layout, all components in [0, 1]:
//   [0]      hour of day / 23
//   [1]      day of month / 31
//   [2]      month / 12
//   [3..6]   per-class history counts, capped at 20 then / 20
//   [7..10]  last class one-hot (all zero before the first label)
//   [11]     seconds since the node's last labelled query, log-scaled
//            against a one-week horizon; 1 when there is none
//   [12..16] query key presence: patient_id, modality, study_date_range,
//            body_part, institution
inline constexpr size_t kClassifierFeatureDim = 17;
inline constexpr size_t kHistoryCountCap = 20;

inline std::vector<double> extract_features(const SessionWindow& s, const NodeHistory& history) {
    std::vector<double> f(kClassifierFeatureDim, 0.0);
    int64_t ts = s.query.ts;
    int64_t day_seconds = ((ts % 86400) + 86400) % 86400;
    CivilDate date = CivilDate::from_seconds(ts);
    f[0] = double(day_seconds / 3600) / 23.0;
    f[1] = double(date.day) / 31.0;
    f[2] = double(date.month) / 12.0;
    for (size_t c = 0; c < 4; ++c)
        f[3 + c] = double(std::min(history.class_counts[c], kHistoryCountCap)) /
                   double(kHistoryCountCap);
    if (history.last_class)
        f[7 + size_t(index_of(*history.last_class)) - 1] = 1.0;
    if (history.last_ts) {
        double dt = double(std::max<int64_t>(0, ts - *history.last_ts));
        f[11] = std::min(1.0, std::log1p(dt) / std::log1p(7.0 * 86400.0));
    } else {
        f[11] = 1.0;
    }
    const QuerySpec& q = *s.query.query;
    f[12] = q.patient_id ? 1.0 : 0.0;
    f[13] = q.modality ? 1.0 : 0.0;
    f[14] = q.study_date_range ? 1.0 : 0.0;
    f[15] = q.body_part ? 1.0 : 0.0;
    f[16] = q.institution ? 1.0 : 0.0;
    return f;
}

// ---------------------------------------------------------------------------
// Live classification and end-of-day supervision.
// ---------------------------------------------------------------------------

struct Classification {
    UsagePattern pattern;
    double confidence; // softmax probability of the chosen class
};

inline Classification classify(const MlpModel& model, const std::vector<double>& features) {
    std::vector<double> probs = model.predict(features);
    if (probs.size() != 4) throw DimensionError("pattern classifier must have 4 outputs");
    size_t best = 0;
    for (size_t i = 1; i < 4; ++i)
        if (probs[i] > probs[best]) best = i; // ties keep the lowest class
    return {usage_pattern_from_index(int(best) + 1), probs[best]};
}

inline MlpModel make_classifier(uint64_t seed, size_t hidden = 16) {
    return MlpModel({kClassifierFeatureDim, hidden, 4}, MlpModel::Mode::Classifier, seed);
}

// Labels every completed session of the day, trains the classifier on the
// resulting batch, and advances per-node histories. Feature extraction sees
// the history as it evolves through the day's sessions, in order. Optionally
// appends one record per session to a training log.
inline void end_of_day_update(MlpModel& model, const std::vector<SessionWindow>& day_sessions,
                              const RepositoryIndex& index,
                              std::map<std::string, NodeHistory>& histories,
                              const TrainParams& params,
                              std::vector<TrainingLogRecord>* training_log = nullptr) {
    if (day_sessions.empty()) return;
    std::vector<MlpSample> batch;
    batch.reserve(day_sessions.size());
    for (const SessionWindow& s : day_sessions) {
        UsagePattern label = label_session(s, index);
        NodeHistory& h = histories[s.aetitle()];
        std::vector<double> features = extract_features(s, h);
        if (training_log)
            training_log->push_back({s.qid, features, index_of(label)});
        batch.push_back({std::move(features), one_hot(size_t(index_of(label)) - 1, 4)});
        h.record(label, s.query.ts);
    }
    model.train(batch, params.epochs, params.learning_rate, params.weight_decay);
}

} // namespace migsim
