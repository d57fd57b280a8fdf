// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "migsim/cache.hpp"
#include "migsim/domain.hpp"
#include "migsim/errors.hpp"
#include "migsim/mlp.hpp"
#include "migsim/patterns.hpp"
#include "migsim/prefetch.hpp"
#include "migsim/rng.hpp"
#include "migsim/sensors.hpp"
#include "migsim/trace_io.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Configuration and results.
// ---------------------------------------------------------------------------

struct NetworkModel {
    double wan_bandwidth_bytes_per_s = 12.5e6; // ~100 Mbit uplink
    double wan_rtt_s = 0.2;                    // per-transfer association overhead
    double lan_bandwidth_bytes_per_s = 125e6;  // ~1 Gbit local delivery
    double lan_overhead_s = 0.01;

    void validate() const {
        if (wan_bandwidth_bytes_per_s <= 0.0)
            throw ConfigError("network.wan_bandwidth_bytes_per_s: must be > 0");
        if (wan_rtt_s < 0.0) throw ConfigError("network.wan_rtt_s: must be >= 0");
        if (lan_bandwidth_bytes_per_s <= 0.0)
            throw ConfigError("network.lan_bandwidth_bytes_per_s: must be > 0");
        if (lan_overhead_s < 0.0) throw ConfigError("network.lan_overhead_s: must be >= 0");
    }
};

struct SimConfig {
    uint64_t cache_capacity_bytes = 1ull << 30;
    double high_watermark = 0.95;
    double low_watermark = 0.85;
    bool prefetch_enabled = true; // false reproduces the eviction-only baseline
    NetworkModel network;
    SensorConfig sensors;
    PrefetchConfig prefetch;
    TrainParams train;            // daily batch schedule for both models
    size_t classifier_hidden = 16;
    size_t scorer_hidden = 16;
    int64_t attribution_window_seconds = 3600;
    uint64_t seed = 1;            // model initialization only; replay has no dice
    bool per_image_time = false;  // divide total time by images instead of requests

    void validate() const {
        if (cache_capacity_bytes == 0) throw ConfigError("sim.cache_capacity_bytes: must be > 0");
        if (attribution_window_seconds <= 0)
            throw ConfigError("patterns.attribution_window_seconds: must be > 0");
        if (classifier_hidden < 1) throw ConfigError("mlp.hidden: must be >= 1");
        if (scorer_hidden < 1) throw ConfigError("mlp.hidden: must be >= 1");
        network.validate();
        sensors.validate();
        prefetch.validate();
    }
};

struct DayStats {
    int64_t day_start_ts = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    double retrieval_time_s = 0.0;
    uint64_t bytes_prefetched = 0;
    uint64_t evictions = 0;
};

struct SimReport {
    uint64_t total_requests = 0; // retrieve events
    uint64_t hits = 0;
    uint64_t misses = 0;
    double hit_ratio = 0.0;
    double retrieval_time_total_s = 0.0;
    double retrieval_time_per_image_s = 0.0;
    uint64_t total_images = 0;
    uint64_t bytes_prefetched = 0;
    uint64_t prefetch_admissions = 0;
    uint64_t prefetch_useful = 0;
    double prefetch_precision = 0.0;
    uint64_t evictions = 0;
    std::vector<DayStats> days;
    std::vector<std::string> warnings;
    std::vector<CacheEntry> final_cache; // sorted by uid
};

// Receives every retrieve in trace order with its hit/miss outcome; the
// reference-policy comparison tests hang off this.
class SimObserver {
public:
    virtual ~SimObserver() = default;
    virtual void on_retrieve(const std::string& uid, bool hit, int64_t request_ts) = 0;
};

// Optional capture of internal streams, enabled by wiring non-null sinks.
struct SimSinks {
    std::vector<MessageLogRecord>* messages = nullptr;
    std::vector<TrainingLogRecord>* training_log = nullptr;
    SimObserver* observer = nullptr;
};

// ---------------------------------------------------------------------------
// The simulator.
// ---------------------------------------------------------------------------

namespace sim_detail {

// Tie order at equal times: finish transfers, then close the day, then let
// the sensor look, then accept new traffic. seq keeps FIFO stability.
enum class EventKind : int { TransferComplete = 0, DayBoundary = 1, SensorTick = 2, Trace = 3 };

struct QueueEvent {
    double time;
    EventKind kind;
    uint64_t seq;
    size_t trace_index = 0;

    bool operator>(const QueueEvent& o) const {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return int(kind) > int(o.kind);
        return seq > o.seq;
    }
};

struct TransferItem {
    std::string uid;
    uint64_t size_bytes = 0;
    CacheOrigin origin = CacheOrigin::Passive;
    std::vector<int64_t> waiting_requests; // request timestamps to settle
};

// Per-node accumulation of one day's scorer supervision.
struct ScorerDayLog {
    struct Returned {
        int64_t query_ts;
        std::string uid;
        std::vector<double> features;
    };
    std::vector<Returned> returned;
    std::map<std::string, std::vector<int64_t>> retrieved; // uid -> timestamps
};

} // namespace sim_detail

class Simulator {
public:
    Simulator(const std::vector<TraceEvent>& trace, const RepositoryIndex& index,
              const SimConfig& cfg, SimSinks sinks = {})
        : trace_(trace), index_(index), cfg_(cfg), sinks_(sinks),
          cache_(cfg.cache_capacity_bytes, cfg.high_watermark, cfg.low_watermark),
          classifier_(make_classifier(derive_seed(cfg.seed, 0x1abe11ed), cfg.classifier_hidden)),
          scorers_(derive_seed(cfg.seed, 0x5c04e4), cfg.scorer_hidden),
          global_scorer_(make_scorer(derive_seed(cfg.seed, 0x910ba1), cfg.scorer_hidden)) {
        cfg_.validate();
        ValidationReport validation = validate_trace(trace_, index_);
        if (!validation.empty())
            throw ParseError("trace validation failed:\n" + validation.to_string());
        if (cfg_.network.lan_bandwidth_bytes_per_s <= cfg_.network.wan_bandwidth_bytes_per_s)
            report_.warnings.push_back("network: LAN bandwidth does not exceed WAN bandwidth");
    }

    SimReport run() {
        if (!trace_.empty()) {
            day0_ = floor_day(trace_.front().ts);
            trace_remaining_ = trace_.size();
            schedule_trace_and_clock();
            while (!events_.empty()) {
                sim_detail::QueueEvent e = events_.top();
                events_.pop();
                dispatch(e);
            }
        }
        finalize_report();
        return report_;
    }

private:
    using EventKind_ = sim_detail::EventKind;
    using QueueEvent = sim_detail::QueueEvent;
    using TransferItem = sim_detail::TransferItem;

    static int64_t floor_day(int64_t ts) { return (ts >= 0 ? ts : ts - 86399) / 86400 * 86400; }

    void push_event(double time, EventKind_ kind, size_t trace_index = 0) {
        events_.push({time, kind, next_seq_++, trace_index});
    }

    void schedule_trace_and_clock() {
        for (size_t i = 0; i < trace_.size(); ++i)
            push_event(double(trace_[i].ts), EventKind_::Trace, i);
        if (!cfg_.prefetch_enabled) return; // the baseline runs no clocks
        int64_t last_ts = trace_.back().ts;
        // Midnights strictly inside (first event, last event + 1 day]: the
        // trailing one closes the final partial day for training.
        for (int64_t m = day0_ + 86400; m <= floor_day(last_ts) + 86400; m += 86400)
            push_event(double(m), EventKind_::DayBoundary);
        for (double t = double(day0_) + cfg_.sensors.window_seconds; t <= double(last_ts);
             t += cfg_.sensors.window_seconds)
            push_event(t, EventKind_::SensorTick);
    }

    void dispatch(const QueueEvent& e) {
        switch (e.kind) {
        case EventKind_::TransferComplete: on_transfer_complete(e.time); break;
        case EventKind_::DayBoundary: on_day_boundary(int64_t(e.time)); break;
        case EventKind_::SensorTick: on_sensor_tick(e.time); break;
        case EventKind_::Trace: on_trace_event(trace_[e.trace_index]); break;
        }
    }

    // --- Link scheduling ----------------------------------------------------

    void start_next_transfer(double now) {
        if (in_flight_) return;
        std::deque<TransferItem>* source = nullptr;
        if (!demand_queue_.empty()) source = &demand_queue_;
        else if (!prefetch_queue_.empty() && trace_remaining_ > 0) source = &prefetch_queue_;
        if (!source) return;
        in_flight_ = std::move(source->front());
        source->pop_front();
        double duration =
            cfg_.network.wan_rtt_s + double(in_flight_->size_bytes) / cfg_.network.wan_bandwidth_bytes_per_s;
        double done = now + duration;
        busy_log_.add_busy(now, done);
        push_event(done, EventKind_::TransferComplete);
    }

    void on_transfer_complete(double now) {
        TransferItem item = std::move(*in_flight_);
        in_flight_.reset();
        pending_uids_.erase(item.uid);

        uint64_t evictions_before = cache_.evictions();
        auto result = cache_.admit(item.uid, item.size_bytes, now, item.origin);
        day_at(int64_t(now)).evictions += cache_.evictions() - evictions_before;
        bool prefetched = item.origin != CacheOrigin::Passive;
        if (prefetched && result.status == StudyCache::AdmitStatus::Admitted) {
            report_.bytes_prefetched += item.size_bytes;
            ++report_.prefetch_admissions;
            day_at(int64_t(now)).bytes_prefetched += item.size_bytes;
        }
        for (int64_t request_ts : item.waiting_requests) {
            double elapsed = now - double(request_ts);
            report_.retrieval_time_total_s += elapsed;
            day_at(request_ts).retrieval_time_s += elapsed;
            if (prefetched && result.status == StudyCache::AdmitStatus::Admitted)
                mark_prefetch_useful(item.uid);
        }
        start_next_transfer(now);
    }

    void enqueue_demand(const std::string& uid, uint64_t size, int64_t request_ts) {
        // A transfer already under way or queued for this study picks up the
        // new request; a queued prefetch is promoted to demand priority.
        if (in_flight_ && in_flight_->uid == uid) {
            in_flight_->waiting_requests.push_back(request_ts);
            return;
        }
        for (auto& item : demand_queue_) {
            if (item.uid == uid) {
                item.waiting_requests.push_back(request_ts);
                return;
            }
        }
        for (auto it = prefetch_queue_.begin(); it != prefetch_queue_.end(); ++it) {
            if (it->uid == uid) {
                TransferItem item = std::move(*it);
                prefetch_queue_.erase(it);
                item.origin = CacheOrigin::Passive; // it now serves demand
                item.waiting_requests.push_back(request_ts);
                demand_queue_.push_back(std::move(item));
                return;
            }
        }
        pending_uids_.insert(uid);
        demand_queue_.push_back({uid, size, CacheOrigin::Passive, {request_ts}});
    }

    void enqueue_prefetch(const std::vector<PrefetchCandidate>& candidates, CacheOrigin origin) {
        for (const PrefetchCandidate& c : candidates) {
            if (pending_uids_.count(c.study_uid)) continue;
            pending_uids_.insert(c.study_uid);
            prefetch_queue_.push_back({c.study_uid, index_.at(c.study_uid).size_bytes, origin, {}});
        }
    }

    // --- Trace events -------------------------------------------------------

    void on_trace_event(const TraceEvent& e) {
        --trace_remaining_;
        if (e.kind == EventKind::Retrieve) on_retrieve(e);
        else on_query(e);
        start_next_transfer(double(e.ts));
    }

    void on_retrieve(const TraceEvent& e) {
        const StudyRecord& study = index_.at(*e.study_uid);
        if (sinks_.messages) sinks_.messages->push_back(message_sensor_record(e));
        if (cfg_.prefetch_enabled) {
            counters_.record(study, e.ts);
            note_session_retrieve(e);
            scorer_day_[e.aetitle].retrieved[study.study_uid].push_back(e.ts);
        }
        ++report_.total_requests;
        report_.total_images += study.num_images;
        bool hit = cache_.touch(study.study_uid, double(e.ts));
        if (sinks_.observer) sinks_.observer->on_retrieve(study.study_uid, hit, e.ts);
        if (hit) {
            ++report_.hits;
            ++day_at(e.ts).hits;
            double elapsed = cfg_.network.lan_overhead_s +
                             double(study.size_bytes) / cfg_.network.lan_bandwidth_bytes_per_s;
            report_.retrieval_time_total_s += elapsed;
            day_at(e.ts).retrieval_time_s += elapsed;
            mark_prefetch_useful(study.study_uid);
        } else {
            ++report_.misses;
            ++day_at(e.ts).misses;
            enqueue_demand(study.study_uid, study.size_bytes, e.ts);
        }
    }

    void on_query(const TraceEvent& e) {
        if (!cfg_.prefetch_enabled) {
            ++next_qid_;
            return;
        }
        std::vector<std::string> results = index_.query(*e.query);
        if (sinks_.messages) sinks_.messages->push_back(message_sensor_record(e, &results));

        // Close the node's previous session, open this one.
        finalize_open_session(e.aetitle);
        SessionWindow session;
        session.query = e;
        session.qid = next_qid_++;
        session.window_seconds = cfg_.attribution_window_seconds;
        open_sessions_.insert_or_assign(e.aetitle, std::move(session));

        Classification predicted =
            classify(classifier_, extract_features(open_sessions_.at(e.aetitle),
                                                   histories_[e.aetitle]));

        // Log every returned study for tonight's scorer supervision.
        auto& day_log = scorer_day_[e.aetitle];
        for (const auto& uid : results)
            day_log.returned.push_back(
                {e.ts, uid, scorer_features(index_.at(uid), e.ts, predicted.pattern)});

        auto candidates =
            short_term_prefetch(*e.query, results, predicted.pattern, index_, cache_,
                                scorers_.for_node(e.aetitle), e.ts, cfg_.prefetch);
        enqueue_prefetch(candidates, CacheOrigin::ShortTermPrefetch);
    }

    // --- Session bookkeeping (mirrors the offline attribution rule) ---------

    void note_session_retrieve(const TraceEvent& e) {
        auto it = open_sessions_.find(e.aetitle);
        if (it == open_sessions_.end()) return;
        SessionWindow& s = it->second;
        if (e.ts >= s.query.ts && e.ts < s.query.ts + s.window_seconds)
            s.retrieves.push_back(e);
    }

    void finalize_open_session(const std::string& aetitle) {
        auto it = open_sessions_.find(aetitle);
        if (it == open_sessions_.end()) return;
        closed_sessions_.push_back(std::move(it->second));
        open_sessions_.erase(it);
    }

    void on_day_boundary(int64_t midnight) {
        // Sessions whose attribution window has run out can no longer gain
        // retrieves; sessions still inside their window stay open and train
        // with a later day.
        std::vector<std::string> expired;
        for (const auto& [ae, s] : open_sessions_)
            if (s.query.ts + s.window_seconds <= midnight) expired.push_back(ae);
        for (const auto& ae : expired) finalize_open_session(ae);

        std::sort(closed_sessions_.begin(), closed_sessions_.end(),
                  [](const SessionWindow& a, const SessionWindow& b) {
                      if (a.query.ts != b.query.ts) return a.query.ts < b.query.ts;
                      return a.qid < b.qid;
                  });
        end_of_day_update(classifier_, closed_sessions_, index_, histories_, cfg_.train,
                          sinks_.training_log);
        closed_sessions_.clear();

        // Scorer supervision: a returned study is positive when the same
        // node demanded it later that day.
        std::vector<MlpSample> merged;
        for (auto& [ae, log] : scorer_day_) {
            std::vector<MlpSample> batch;
            batch.reserve(log.returned.size());
            for (auto& r : log.returned) {
                bool positive = false;
                auto rit = log.retrieved.find(r.uid);
                if (rit != log.retrieved.end())
                    for (int64_t ts : rit->second)
                        if (ts >= r.query_ts) {
                            positive = true;
                            break;
                        }
                batch.push_back({std::move(r.features), {positive ? 1.0 : 0.0}});
            }
            merged.insert(merged.end(), batch.begin(), batch.end());
            train_scorer(scorers_.for_node(ae), batch, cfg_.train);
        }
        train_scorer(global_scorer_, merged, cfg_.train);
        scorer_day_.clear();

        ++days_elapsed_;
        if (days_elapsed_ % cfg_.prefetch.counter_halving_days == 0) counters_.halve();
    }

    // --- Idle-time planning --------------------------------------------------

    void on_sensor_tick(double now) {
        double utilization = network_utilization(busy_log_, now, cfg_.sensors.window_seconds);
        if (!is_idle(utilization, cfg_.sensors.idle_threshold)) return;
        // Candidate selection only depends on cache membership, the
        // counters, and the nightly models; skip the scan when none changed.
        uint64_t state_key = cache_.evictions() + cache_.size() + counters_.updates() +
                             uint64_t(days_elapsed_) * 1000003u;
        if (state_key == last_plan_key_) return;
        last_plan_key_ = state_key;
        auto candidates =
            long_term_prefetch(counters_, index_, cache_, utilization,
                               cfg_.sensors.idle_threshold, global_scorer_, int64_t(now),
                               cfg_.prefetch);
        enqueue_prefetch(candidates, CacheOrigin::LongTermPrefetch);
        start_next_transfer(now);
    }

    // --- Metrics helpers ------------------------------------------------------

    void mark_prefetch_useful(const std::string& uid) {
        const CacheEntry* entry = cache_.find(uid);
        if (!entry || entry->origin == CacheOrigin::Passive) return;
        ++report_.prefetch_useful;
        cache_.set_origin(uid, CacheOrigin::Passive);
    }

    DayStats& day_at(int64_t ts) {
        size_t day = size_t((floor_day(ts) - day0_) / 86400);
        while (report_.days.size() <= day)
            report_.days.push_back(DayStats{day0_ + int64_t(report_.days.size()) * 86400});
        return report_.days[day];
    }

    void finalize_report() {
        report_.hit_ratio =
            report_.total_requests ? double(report_.hits) / double(report_.total_requests) : 0.0;
        uint64_t denom = cfg_.per_image_time ? report_.total_images : report_.total_requests;
        report_.retrieval_time_per_image_s =
            denom ? report_.retrieval_time_total_s / double(denom) : 0.0;
        report_.prefetch_precision =
            report_.prefetch_admissions
                ? double(report_.prefetch_useful) / double(report_.prefetch_admissions)
                : 0.0;
        report_.evictions = cache_.evictions();
        report_.final_cache = cache_.snapshot();
        if (report_.hits + report_.misses != report_.total_requests)
            throw std::logic_error("retrieve accounting out of balance");
    }

    // --- State ----------------------------------------------------------------

    const std::vector<TraceEvent>& trace_;
    const RepositoryIndex& index_;
    SimConfig cfg_;
    SimSinks sinks_;

    std::priority_queue<QueueEvent, std::vector<QueueEvent>, std::greater<QueueEvent>> events_;
    uint64_t next_seq_ = 0;
    int64_t day0_ = 0;
    size_t trace_remaining_ = 0;

    StudyCache cache_;
    BusyLog busy_log_;
    CategoryCounters counters_;

    MlpModel classifier_;
    ScorerSet scorers_;
    MlpModel global_scorer_;
    std::map<std::string, NodeHistory> histories_;

    std::map<std::string, SessionWindow> open_sessions_;
    std::vector<SessionWindow> closed_sessions_;
    std::map<std::string, sim_detail::ScorerDayLog> scorer_day_;
    int64_t next_qid_ = 0;
    int64_t days_elapsed_ = 0;
    uint64_t last_plan_key_ = UINT64_MAX;

    std::optional<TransferItem> in_flight_;
    std::deque<TransferItem> demand_queue_;
    std::deque<TransferItem> prefetch_queue_;
    std::set<std::string> pending_uids_;

    SimReport report_;
};

inline SimReport run_simulation(const std::vector<TraceEvent>& trace,
                                const RepositoryIndex& index, const SimConfig& cfg,
                                SimSinks sinks = {}) {
    Simulator sim(trace, index, cfg, sinks);
    return sim.run();
}

// ---------------------------------------------------------------------------
// Cache-size sweeps.
// ---------------------------------------------------------------------------

struct ExperimentCell {
    double cache_fraction = 0.0; // of total repository bytes
    int config = 1;              // 1 = eviction only, 2 = eviction + prefetch
    int repetition = 0;
    SimReport report;
};

// Runs |sizes| x {config 1, config 2} x repetitions simulations (config 1
// only when the prefetch arm is disabled). Replay is deterministic, so
// repetitions differ only through derived model seeds; config 1 uses no
// models and its repetitions are identical by construction.
inline std::vector<ExperimentCell> run_experiment(const std::vector<TraceEvent>& trace,
                                                  const RepositoryIndex& index,
                                                  const std::vector<uint64_t>& cache_sizes,
                                                  int repetitions, const SimConfig& base,
                                                  bool with_prefetch_arm = true) {
    if (cache_sizes.empty()) throw ConfigError("sim.cache_sizes: must not be empty");
    if (repetitions < 1) throw ConfigError("sim.repetitions: must be >= 1");
    std::vector<ExperimentCell> cells;
    int max_config = with_prefetch_arm ? 2 : 1;
    for (size_t si = 0; si < cache_sizes.size(); ++si) {
        for (int config = 1; config <= max_config; ++config) {
            for (int rep = 0; rep < repetitions; ++rep) {
                SimConfig cfg = base;
                cfg.cache_capacity_bytes = cache_sizes[si];
                cfg.prefetch_enabled = (config == 2);
                cfg.seed = derive_seed(base.seed, si + 1, uint64_t(config), uint64_t(rep + 1));
                ExperimentCell cell;
                cell.cache_fraction = double(cache_sizes[si]) / double(index.total_bytes());
                cell.config = config;
                cell.repetition = rep;
                cell.report = run_simulation(trace, index, cfg);
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

} // namespace migsim
