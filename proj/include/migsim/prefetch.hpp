// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "migsim/cache.hpp"
#include "migsim/domain.hpp"
#include "migsim/mlp.hpp"
#include "migsim/rng.hpp"
#include "migsim/sensors.hpp"

namespace migsim {

struct PrefetchConfig {
    int top_k_cells = 2;                      // popularity cells mined for long-term
    double fill_fraction = 0.5;               // of free space, long-term byte budget
    // Minimum rule score for any candidate. The scorer is trained on heavily
    // unbalanced retrieve outcomes, so its outputs settle near the per-class
    // base rates (roughly 0.005 to 0.35 in measured runs); the floor is set
    // just above the junk tail rather than at a nominal probability midpoint,
    // which would silently disqualify everything.
    double score_floor = 0.02;
    double short_term_budget_fraction = 0.5;  // of capacity, short-term byte budget
    int counter_halving_days = 30;            // popularity decay period

    void validate() const {
        if (top_k_cells < 1) throw ConfigError("prefetch.top_k_cells: must be >= 1");
        if (fill_fraction <= 0.0 || fill_fraction > 1.0)
            throw ConfigError("prefetch.fill_fraction: must be in (0, 1]");
        if (score_floor < 0.0 || score_floor >= 1.0)
            throw ConfigError("prefetch.score_floor: must be in [0, 1)");
        if (short_term_budget_fraction <= 0.0 || short_term_budget_fraction > 1.0)
            throw ConfigError("prefetch.short_term_budget_fraction: must be in (0, 1]");
        if (counter_halving_days < 1)
            throw ConfigError("prefetch.counter_halving_days: must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Popularity counters over (modality, study age) categories.
// ---------------------------------------------------------------------------

enum class AgeBucket : int { LastDay = 0, LastWeek, LastMonth, LastYear, Older };

inline AgeBucket age_bucket(const CivilDate& study_date, int64_t now_ts) {
    int64_t age_days =
        CivilDate::from_seconds(now_ts).days_since_epoch() - study_date.days_since_epoch();
    if (age_days <= 1) return AgeBucket::LastDay;
    if (age_days <= 7) return AgeBucket::LastWeek;
    if (age_days <= 31) return AgeBucket::LastMonth;
    if (age_days <= 366) return AgeBucket::LastYear;
    return AgeBucket::Older;
}

class CategoryCounters {
public:
    struct Cell {
        std::string modality;
        AgeBucket bucket;
        double count;
    };

    void record(const StudyRecord& study, int64_t now_ts) {
        ++counts_[{study.modality.token(), int(age_bucket(study.study_date, now_ts))}];
    }

    double get(const std::string& modality, AgeBucket bucket) const {
        auto it = counts_.find({modality, int(bucket)});
        return it == counts_.end() ? 0.0 : it->second;
    }

    // Hottest cells first; the stale `Older` bucket never qualifies. Ties go
    // to the lexicographically smaller modality, then the fresher bucket.
    std::vector<Cell> top_cells(int k) const {
        std::vector<Cell> cells;
        for (const auto& [key, count] : counts_)
            if (count > 0.0 && AgeBucket(key.second) != AgeBucket::Older)
                cells.push_back({key.first, AgeBucket(key.second), count});
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
            if (a.count != b.count) return a.count > b.count;
            if (a.modality != b.modality) return a.modality < b.modality;
            return int(a.bucket) < int(b.bucket);
        });
        if (int(cells.size()) > k) cells.resize(size_t(k));
        return cells;
    }

    // Periodic decay so popularity tracks the recent workload.
    void halve() {
        for (auto& [key, count] : counts_) count *= 0.5;
    }

    uint64_t updates() const {
        double total = 0.0;
        for (const auto& [key, count] : counts_) total += count;
        return uint64_t(total);
    }

private:
    std::map<std::pair<std::string, int>, double> counts_;
};

// ---------------------------------------------------------------------------
// Prefetching-rule features and the per-node scorer.
// ---------------------------------------------------------------------------

// Layout, all components in [0, 1]:
//   [0]      time since the study was produced, log-scaled against a
//            two-year horizon
//   [1..9]   body part one-hot (8 known + other)
//   [10..16] modality one-hot (6 known + other)
//   [17..19] patient sex one-hot (M, F, O)
//   [20]     patient age in years / 100, clamped
//   [21..24] usage pattern one-hot (all zero when no query context exists)
//   [25..28] institution hash bucket (4 buckets)
inline constexpr size_t kScorerFeatureDim = 29;

inline std::vector<double> scorer_features(const StudyRecord& study, int64_t now_ts,
                                           std::optional<UsagePattern> pattern) {
    std::vector<double> f(kScorerFeatureDim, 0.0);
    double age_s = double(std::max<int64_t>(0, now_ts - study.study_date.seconds_since_epoch()));
    f[0] = std::min(1.0, std::log1p(age_s) / std::log1p(2.0 * 366.0 * 86400.0));
    f[1 + study.body_part.index()] = 1.0;
    f[10 + study.modality.index()] = 1.0;
    f[17 + size_t(study.patient_sex)] = 1.0;
    f[20] = std::clamp(age_years_at_ts(study.patient_birth_date, now_ts) / 100.0, 0.0, 1.0);
    if (pattern) f[21 + size_t(index_of(*pattern)) - 1] = 1.0;
    f[25 + size_t(fnv1a64(study.institution) % 4)] = 1.0;
    return f;
}

inline MlpModel make_scorer(uint64_t seed, size_t hidden = 16) {
    return MlpModel({kScorerFeatureDim, hidden, 1}, MlpModel::Mode::Scorer, seed);
}

// Scorers are per node, created on first use so traces with unexpected
// AETitles just work. Seeds derive from the node name for reproducibility
// independent of arrival order.
class ScorerSet {
public:
    ScorerSet(uint64_t base_seed, size_t hidden) : base_seed_(base_seed), hidden_(hidden) {}

    MlpModel& for_node(const std::string& aetitle) {
        auto it = scorers_.find(aetitle);
        if (it == scorers_.end())
            it = scorers_
                     .emplace(aetitle,
                              make_scorer(derive_seed(base_seed_, fnv1a64(aetitle)), hidden_))
                     .first;
        return it->second;
    }

    const std::map<std::string, MlpModel>& all() const { return scorers_; }

private:
    uint64_t base_seed_;
    size_t hidden_;
    std::map<std::string, MlpModel> scorers_;
};

inline void train_scorer(MlpModel& scorer, const std::vector<MlpSample>& day_batch,
                         const TrainParams& params) {
    if (day_batch.empty()) return;
    scorer.train(day_batch, params.epochs, params.learning_rate, params.weight_decay);
}

// ---------------------------------------------------------------------------
// Candidate selection.
// ---------------------------------------------------------------------------

enum class CandidateSource { QueryResults, PatternQuery, LongTerm };

struct PrefetchCandidate {
    std::string study_uid;
    double score = 0.0;
    CandidateSource source = CandidateSource::QueryResults;
};

namespace prefetch_detail {

inline void sort_candidates(std::vector<PrefetchCandidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(),
              [](const PrefetchCandidate& a, const PrefetchCandidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.study_uid < b.study_uid;
              });
}

// Greedy byte-budget filter over an already sorted list: oversized entries
// are skipped, not stop markers.
inline std::vector<PrefetchCandidate> take_within_budget(
    const std::vector<PrefetchCandidate>& sorted, const RepositoryIndex& index,
    uint64_t budget_bytes) {
    std::vector<PrefetchCandidate> out;
    uint64_t total = 0;
    for (const PrefetchCandidate& c : sorted) {
        uint64_t size = index.at(c.study_uid).size_bytes;
        if (total + size > budget_bytes) continue;
        total += size;
        out.push_back(c);
    }
    return out;
}

// Most frequent value among the result records; ties pick the smallest.
template <typename KeyFn>
std::optional<std::string> dominant_value(const RepositoryIndex& index,
                                          const std::vector<std::string>& uids, KeyFn&& key) {
    std::map<std::string, size_t> freq;
    for (const auto& uid : uids) ++freq[key(index.at(uid))];
    std::optional<std::string> best;
    size_t best_count = 0;
    for (const auto& [value, count] : freq) {
        if (count > best_count) {
            best = value;
            best_count = count;
        }
    }
    return best;
}

} // namespace prefetch_detail

// Idle-time mining of the popularity counters: gathers uncached studies from
// the hottest (modality, age) cells, scores them, and returns the best ones
// within a fraction of the free space. Silent while the link is loaded or
// the cache has no room.
inline std::vector<PrefetchCandidate> long_term_prefetch(
    const CategoryCounters& counters, const RepositoryIndex& index, const StudyCache& cache,
    double net_utilization, double idle_threshold, const MlpModel& scorer, int64_t now_ts,
    const PrefetchConfig& cfg) {
    if (!is_idle(net_utilization, idle_threshold)) return {};
    if (cache.free_space() == 0) return {};
    std::vector<PrefetchCandidate> candidates;
    std::set<std::string> seen;
    for (const auto& cell : counters.top_cells(cfg.top_k_cells)) {
        for (const auto& uid : index.uids_of_modality(cell.modality)) {
            if (cache.contains(uid) || seen.count(uid)) continue;
            const StudyRecord& r = index.at(uid);
            if (age_bucket(r.study_date, now_ts) != cell.bucket) continue;
            double score = scorer.predict(scorer_features(r, now_ts, std::nullopt))[0];
            if (score < cfg.score_floor) continue;
            seen.insert(uid);
            candidates.push_back({uid, score, CandidateSource::LongTerm});
        }
    }
    prefetch_detail::sort_candidates(candidates);
    uint64_t budget = uint64_t(cfg.fill_fraction * double(cache.free_space()));
    return prefetch_detail::take_within_budget(candidates, index, budget);
}

// Query-triggered prefetch. Process 1 scores the query's own results that
// are consistent with the predicted pattern; process 2 issues a secondary
// query widening the pattern (the dominant patient's studies, or the
// modality over the last month). Inconsequent queries and "other" sessions
// get no secondary query.
inline std::vector<PrefetchCandidate> short_term_prefetch(
    const QuerySpec& query, const std::vector<std::string>& query_results,
    UsagePattern predicted, const RepositoryIndex& index, const StudyCache& cache,
    const MlpModel& scorer, int64_t now_ts, const PrefetchConfig& cfg) {
    using namespace prefetch_detail;

    std::optional<std::string> dominant_patient = dominant_value(
        index, query_results, [](const StudyRecord& r) { return r.patient_id; });
    std::optional<std::string> dominant_modality = dominant_value(
        index, query_results, [](const StudyRecord& r) { return r.modality.token(); });

    auto score_of = [&](const StudyRecord& r) {
        return scorer.predict(scorer_features(r, now_ts, predicted))[0];
    };

    // Process 1: the query's own results, filtered for pattern consistency.
    std::vector<PrefetchCandidate> candidates;
    std::set<std::string> covered;
    for (const auto& uid : query_results) {
        if (cache.contains(uid)) continue;
        const StudyRecord& r = index.at(uid);
        if (predicted == UsagePattern::PatientRevising && dominant_patient &&
            r.patient_id != *dominant_patient)
            continue;
        if (predicted == UsagePattern::ModalityRevising && dominant_modality &&
            r.modality.token() != *dominant_modality)
            continue;
        covered.insert(uid);
        candidates.push_back({uid, score_of(r), CandidateSource::QueryResults});
    }

    // Process 2: a secondary query for the two revising patterns.
    std::optional<QuerySpec> secondary;
    if (predicted == UsagePattern::PatientRevising && dominant_patient) {
        QuerySpec q;
        q.patient_id = dominant_patient;
        secondary = q;
    } else if (predicted == UsagePattern::ModalityRevising) {
        std::optional<Modality> modality = query.modality;
        if (!modality && dominant_modality) modality = Modality(*dominant_modality);
        if (modality) {
            QuerySpec q;
            q.modality = modality;
            CivilDate today = CivilDate::from_seconds(now_ts);
            q.study_date_range =
                DateRange{CivilDate::from_days(today.days_since_epoch() - 31), today};
            secondary = q;
        }
    }
    if (secondary) {
        for (const auto& uid : index.query(*secondary)) {
            if (cache.contains(uid) || covered.count(uid)) continue;
            covered.insert(uid);
            candidates.push_back({uid, score_of(index.at(uid)), CandidateSource::PatternQuery});
        }
    }

    std::erase_if(candidates,
                  [&](const PrefetchCandidate& c) { return c.score < cfg.score_floor; });
    sort_candidates(candidates);
    uint64_t budget =
        uint64_t(cfg.short_term_budget_fraction * double(cache.capacity_bytes()));
    return take_within_budget(candidates, index, budget);
}

} // namespace migsim
