// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "migsim/domain.hpp"
#include "migsim/trace_io.hpp"

namespace migsim {

struct SensorConfig {
    double window_seconds = 600.0; // trailing utilization window
    double idle_threshold = 0.3;   // utilization below this counts as idle

    void validate() const {
        if (window_seconds <= 0.0) throw ConfigError("sensors.window_seconds: must be > 0");
        if (idle_threshold < 0.0 || idle_threshold > 1.0)
            throw ConfigError("sensors.idle_threshold: must be in [0, 1]");
    }
};

// Busy intervals of the simulated WAN link, in ascending order. Transfers
// are recorded as they finish, so appends arrive time-ordered; overlapping
// or touching intervals are merged on insertion.
class BusyLog {
public:
    void add_busy(double start, double end) {
        if (end <= start) return;
        if (!intervals_.empty() && start < intervals_.back().second) {
            // Tolerate out-of-order inserts by merging backwards.
            std::pair<double, double> merged{start, end};
            while (!intervals_.empty() && intervals_.back().second >= merged.first) {
                merged.first = std::min(merged.first, intervals_.back().first);
                merged.second = std::max(merged.second, intervals_.back().second);
                intervals_.pop_back();
            }
            intervals_.push_back(merged);
            return;
        }
        if (!intervals_.empty() && intervals_.back().second == start)
            intervals_.back().second = end;
        else
            intervals_.push_back({start, end});
    }

    double busy_seconds_in(double window_start, double window_end) const {
        if (window_end <= window_start) return 0.0;
        double busy = 0.0;
        auto it = std::lower_bound(
            intervals_.begin(), intervals_.end(), window_start,
            [](const std::pair<double, double>& iv, double t) { return iv.second <= t; });
        for (; it != intervals_.end() && it->first < window_end; ++it)
            busy += std::min(it->second, window_end) - std::max(it->first, window_start);
        return busy;
    }

    size_t interval_count() const { return intervals_.size(); }

private:
    std::vector<std::pair<double, double>> intervals_;
};

// Fraction of the trailing window the link spent transferring, in [0, 1].
inline double network_utilization(const BusyLog& log, double now, double window_seconds) {
    if (window_seconds <= 0.0) throw ConfigError("sensors.window_seconds: must be > 0");
    double busy = log.busy_seconds_in(now - window_seconds, now);
    return std::clamp(busy / window_seconds, 0.0, 1.0);
}

inline bool is_idle(double utilization, double threshold) { return utilization < threshold; }

// One entry of the message sensor's event report stream.
struct MessageLogRecord {
    int64_t ts = 0;
    std::string kind;           // "find" or "move"
    std::string source;         // requesting node
    std::string destination;    // serving side of the exchange
    std::optional<QuerySpec> query;
    std::optional<std::string> study_uid;
    std::vector<std::string> matches; // uids answering a query

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["ts"] = ts;
        j["kind"] = kind;
        j["source"] = source;
        j["destination"] = destination;
        if (query) j["q"] = migsim::to_json(*query);
        if (study_uid) j["uid"] = *study_uid;
        if (kind == "find") j["matches"] = matches;
        return j;
    }
};

inline MessageLogRecord message_sensor_record(
    const TraceEvent& event, const std::vector<std::string>* response_uids = nullptr) {
    MessageLogRecord r;
    r.ts = event.ts;
    r.source = event.aetitle;
    r.destination = "GATEWAY";
    if (event.kind == EventKind::Query) {
        r.kind = "find";
        r.query = event.query;
        if (response_uids) r.matches = *response_uids;
    } else {
        r.kind = "move";
        r.study_uid = event.study_uid;
    }
    return r;
}

// Exact metadata lookup; unresolvable uids are an error naming the uid.
inline const StudyRecord& study_sensor_lookup(const RepositoryIndex& index,
                                              const std::string& uid) {
    return index.at(uid);
}

} // namespace migsim
