// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "migsim/domain.hpp"
#include "migsim/errors.hpp"
#include "migsim/patterns.hpp"
#include "migsim/rng.hpp"
#include "migsim/trace_io.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct RetrievesSpec {
    int min = 1;
    int max = 8;
    double mean = 3.0;
};

struct WorkloadConfig {
    int duration_days = 90;
    int n_studies = 4000;
    uint64_t total_repo_bytes = 20ull << 30;
    int n_workstations = 3;
    // PatientRevising, ModalityRevising, InconsequentQuery, Other.
    std::array<double, 4> class_mix = {0.5, 0.3, 0.1, 0.1};
    double session_rate_per_day = 15.0;
    RetrievesSpec retrieves_per_session;
    uint64_t seed = 1;
    double working_set_skew = 0.8; // Zipf exponent over patient popularity

    void validate() const {
        if (duration_days < 1) throw ConfigError("workload.duration_days: must be >= 1");
        if (n_studies < 1) throw ConfigError("workload.n_studies: must be >= 1");
        if (total_repo_bytes < uint64_t(n_studies))
            throw ConfigError("workload.total_repo_bytes: too small for n_studies");
        if (n_workstations < 1) throw ConfigError("workload.n_workstations: must be >= 1");
        double sum = 0.0;
        for (double p : class_mix) {
            if (p < 0.0) throw ConfigError("workload.class_mix: probabilities must be >= 0");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ConfigError("workload.class_mix: must sum to 1");
        if (session_rate_per_day <= 0.0)
            throw ConfigError("workload.session_rate_per_day: must be > 0");
        const RetrievesSpec& r = retrieves_per_session;
        if (r.min < 1 || r.max < r.min)
            throw ConfigError("workload.retrieves_per_session: need 1 <= min <= max");
        if (r.mean < r.min || r.mean > r.max)
            throw ConfigError("workload.retrieves_per_session.mean: must lie in [min, max]");
        if (working_set_skew < 0.0)
            throw ConfigError("workload.working_set_skew: must be >= 0");
    }
};

struct Workload {
    RepositoryIndex index;
    std::vector<TraceEvent> events;
    std::vector<SessionLabel> labels; // ground truth per query ordinal
    int64_t start_ts = 0;
    int64_t end_ts = 0;
};

// ---------------------------------------------------------------------------
// Generator internals.
// ---------------------------------------------------------------------------

namespace workload_detail {

struct ModalityProfile {
    const char* token;
    double weight;
    double size_multiplier; // relative log-normal median
};

// Rough clinical mixture; tomographic modalities dominate bytes.
inline const std::array<ModalityProfile, 6>& modality_profiles() {
    static const std::array<ModalityProfile, 6> t = {{
        {"CT", 0.30, 4.0},
        {"MR", 0.20, 3.0},
        {"CR", 0.20, 0.8},
        {"US", 0.15, 0.5},
        {"DX", 0.10, 0.7},
        {"XA", 0.05, 1.5},
    }};
    return t;
}

struct BodyPartChoice {
    const char* token;
    double weight;
};

inline const std::vector<BodyPartChoice>& body_parts_for(const std::string& modality) {
    static const std::map<std::string, std::vector<BodyPartChoice>> table = {
        {"CT", {{"CHEST", 0.35}, {"ABDOMEN", 0.25}, {"HEAD", 0.25}, {"PELVIS", 0.15}}},
        {"MR", {{"HEAD", 0.40}, {"SPINE", 0.30}, {"KNEE", 0.20}, {"PELVIS", 0.10}}},
        {"CR", {{"CHEST", 0.70}, {"SPINE", 0.20}, {"KNEE", 0.10}}},
        {"US", {{"ABDOMEN", 0.50}, {"BREAST", 0.30}, {"NECK", 0.20}}},
        {"DX", {{"CHEST", 0.60}, {"KNEE", 0.25}, {"SPINE", 0.15}}},
        {"XA", {{"HEAD", 0.50}, {"CHEST", 0.50}}},
    };
    return table.at(modality);
}

template <typename T>
size_t weighted_pick(Rng& rng, const T& table) {
    double total = 0.0;
    for (const auto& e : table) total += e.weight;
    double u = rng.uniform01() * total;
    for (size_t i = 0; i < table.size(); ++i) {
        u -= table[i].weight;
        if (u < 0.0) return i;
    }
    return table.size() - 1;
}

// Integer apportionment by largest remainder; quotas need not be integral.
inline std::vector<int64_t> apportion(int64_t total, const std::vector<double>& weights) {
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<int64_t> out(weights.size(), 0);
    std::vector<std::pair<double, size_t>> remainders(weights.size());
    int64_t assigned = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        double quota = wsum > 0.0 ? double(total) * weights[i] / wsum : 0.0;
        out[i] = int64_t(std::floor(quota));
        assigned += out[i];
        remainders[i] = {quota - double(out[i]), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int64_t i = 0; i < total - assigned; ++i) ++out[remainders[size_t(i)].second];
    return out;
}

inline std::string padded_id(char prefix, size_t ordinal, size_t width) {
    std::string digits = std::to_string(ordinal);
    std::string out(1, prefix);
    out.append(width > digits.size() ? width - digits.size() : 0, '0');
    out += digits;
    return out;
}

struct PatientInfo {
    std::string id;
    Sex sex;
    CivilDate birth;
};

struct PendingSession {
    size_t seq = 0; // construction order, used as the stable tiebreak
    int day = 0;
    int workstation = 0;
    int64_t start_ts = 0;
    UsagePattern intended = UsagePattern::InconsequentQuery;
    int k = 0;
    std::vector<int64_t> think_seconds;
    QuerySpec query;
    std::vector<std::string> retrieve_uids;
};

} // namespace workload_detail

// ---------------------------------------------------------------------------
// Generation. Deterministic for a fixed config: independent substreams are
// derived from the seed, containers iterate in sorted order, and every sort
// carries an explicit tiebreak.
// ---------------------------------------------------------------------------

inline Workload generate_workload(const WorkloadConfig& cfg) {
    using namespace workload_detail;
    cfg.validate();

    Workload out;
    // Fixed anchor (a Monday) so weekday structure is stable across runs.
    const int64_t start_day = CivilDate{2017, 1, 2}.days_since_epoch();
    out.start_ts = start_day * 86400;
    out.end_ts = out.start_ts + int64_t(cfg.duration_days) * 86400;
    const CivilDate end_date = CivilDate::from_days(start_day + cfg.duration_days);

    Rng repo_rng(derive_seed(cfg.seed, 1));
    Rng schedule_rng(derive_seed(cfg.seed, 2));
    Rng content_rng(derive_seed(cfg.seed, 3));

    // --- Patients ---------------------------------------------------------
    size_t n_patients = std::max<size_t>(2, size_t(cfg.n_studies) / 4);
    size_t patient_width = std::to_string(n_patients).size();
    std::vector<PatientInfo> patients(n_patients);
    for (size_t i = 0; i < n_patients; ++i) {
        PatientInfo& p = patients[i];
        p.id = padded_id('P', i + 1, patient_width);
        double u = repo_rng.uniform01();
        p.sex = u < 0.48 ? Sex::M : (u < 0.96 ? Sex::F : Sex::O);
        int64_t age_days = repo_rng.uniform_int(3 * 365, 95 * 365);
        p.birth = CivilDate::from_days(start_day - age_days);
    }
    // Patient index 0 is the most popular under the Zipf ranking.
    ZipfSampler patient_zipf(n_patients, cfg.working_set_skew);

    // --- Studies ----------------------------------------------------------
    struct InstChoice {
        const char* token;
        double weight;
    };
    const std::array<InstChoice, 3> inst_table = {{{"INST_A", 0.6}, {"INST_B", 0.3}, {"INST_C", 0.1}}};

    size_t study_width = std::to_string(cfg.n_studies).size();
    std::vector<StudyRecord> studies(size_t(cfg.n_studies));
    std::vector<double> raw_sizes(size_t(cfg.n_studies));
    double raw_total = 0.0;
    for (size_t i = 0; i < studies.size(); ++i) {
        StudyRecord& s = studies[i];
        s.study_uid = padded_id('S', i + 1, study_width);
        const PatientInfo& p = patients[patient_zipf.sample(repo_rng)];
        s.patient_id = p.id;
        s.patient_sex = p.sex;
        s.patient_birth_date = p.birth;
        size_t mi = weighted_pick(repo_rng, modality_profiles());
        const ModalityProfile& mp = modality_profiles()[mi];
        s.modality = Modality(mp.token);
        const auto& bps = body_parts_for(mp.token);
        s.body_part = BodyPart(bps[weighted_pick(repo_rng, bps)].token);
        s.institution = inst_table[weighted_pick(repo_rng, inst_table)].token;
        // Age at trace end: a recent bulge plus a long tail back two years.
        double u = repo_rng.uniform01();
        int64_t age_days;
        if (u < 0.35) age_days = repo_rng.uniform_int(0, 45);
        else if (u < 0.70) age_days = repo_rng.uniform_int(45, 210);
        else age_days = repo_rng.uniform_int(210, 730);
        s.study_date = CivilDate::from_days(end_date.days_since_epoch() - age_days);
        raw_sizes[i] = repo_rng.lognormal(mp.size_multiplier, 0.5);
        raw_total += raw_sizes[i];
    }
    // Scale sizes so the repository hits the configured total (±1%).
    double scale = double(cfg.total_repo_bytes) / raw_total;
    for (size_t i = 0; i < studies.size(); ++i) {
        studies[i].size_bytes = std::max<uint64_t>(1, uint64_t(std::llround(raw_sizes[i] * scale)));
        studies[i].num_images =
            std::max<uint32_t>(1, uint32_t(studies[i].size_bytes / (512 * 1024)));
        out.index.add(studies[i]);
    }

    // --- Session schedule --------------------------------------------------
    // Weekends run at a reduced rate; weights are normalized so the configured
    // rate is the all-days average.
    std::vector<double> day_weights(size_t(cfg.duration_days));
    for (int d = 0; d < cfg.duration_days; ++d) {
        // Day 0 of the epoch is a Thursday, so shift by 3 to make Monday 0.
        int dow = int((start_day + d + 3) % 7);
        day_weights[size_t(d)] = (dow == 5 || dow == 6) ? 0.15 : 1.0;
    }
    int64_t total_sessions =
        std::max<int64_t>(1, std::llround(cfg.session_rate_per_day * cfg.duration_days));
    std::vector<int64_t> sessions_per_day = apportion(total_sessions, day_weights);

    std::vector<int64_t> class_counts = apportion(
        total_sessions, {cfg.class_mix[0], cfg.class_mix[1], cfg.class_mix[2], cfg.class_mix[3]});
    std::vector<UsagePattern> class_of;
    class_of.reserve(size_t(total_sessions));
    for (int c = 0; c < 4; ++c)
        class_of.insert(class_of.end(), size_t(class_counts[size_t(c)]),
                        usage_pattern_from_index(c + 1));
    for (size_t i = class_of.size(); i > 1; --i)
        std::swap(class_of[i - 1], class_of[size_t(schedule_rng.below(i))]);

    const RetrievesSpec& rs = cfg.retrieves_per_session;
    int k_span = rs.max - rs.min;
    double k_p = k_span > 0 ? (rs.mean - rs.min) / double(k_span) : 0.0;

    size_t n_sessions = size_t(total_sessions);
    std::vector<PendingSession> sessions(n_sessions);
    size_t seq = 0;
    for (int d = 0; d < cfg.duration_days; ++d) {
        for (int64_t j = 0; j < sessions_per_day[size_t(d)]; ++j, ++seq) {
            PendingSession& s = sessions[seq];
            s.seq = seq;
            s.day = d;
            s.workstation = int(schedule_rng.below(uint64_t(cfg.n_workstations)));
            // Business hours, 08:00 to 18:00.
            s.start_ts = out.start_ts + int64_t(d) * 86400 + 8 * 3600 +
                         schedule_rng.uniform_int(0, 10 * 3600 - 1);
            s.intended = class_of[seq];
            int k = rs.min;
            for (int t = 0; t < k_span; ++t)
                if (schedule_rng.bernoulli(k_p)) ++k;
            switch (s.intended) {
            case UsagePattern::InconsequentQuery: k = 0; break;
            case UsagePattern::ModalityRevising:
            case UsagePattern::Other: k = std::max(k, 2); break;
            default: break;
            }
            s.k = k;
            for (int t = 0; t < k; ++t)
                s.think_seconds.push_back(schedule_rng.uniform_int(30, 180));
        }
    }

    // Enforce per-workstation serial sessions: each query starts at least a
    // minute after the previous session on that workstation finished, so
    // retrieve attribution by "most recent prior query" is unambiguous.
    std::vector<std::vector<size_t>> by_ws(size_t(cfg.n_workstations));
    for (size_t i = 0; i < sessions.size(); ++i)
        by_ws[size_t(sessions[i].workstation)].push_back(i);
    for (auto& idxs : by_ws) {
        std::stable_sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
            if (sessions[a].start_ts != sessions[b].start_ts)
                return sessions[a].start_ts < sessions[b].start_ts;
            return sessions[a].seq < sessions[b].seq;
        });
        int64_t prev_end = INT64_MIN;
        for (size_t i : idxs) {
            PendingSession& s = sessions[i];
            if (prev_end != INT64_MIN && s.start_ts < prev_end + 60) s.start_ts = prev_end + 60;
            int64_t dur = 0;
            for (int64_t t : s.think_seconds) dur += t;
            prev_end = s.start_ts + dur;
        }
    }

    // --- Session content ---------------------------------------------------
    std::vector<size_t> order(sessions.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sessions[a].start_ts != sessions[b].start_ts)
            return sessions[a].start_ts < sessions[b].start_ts;
        return sessions[a].seq < sessions[b].seq;
    });

    // Patients ranked most-popular-first for fallback scans.
    auto eligible_of_patient = [&](const std::string& pid, const CivilDate& cutoff) {
        std::vector<std::string> uids;
        for (const auto& uid : out.index.uids_of_patient(pid))
            if (out.index.at(uid).study_date <= cutoff) uids.push_back(uid);
        // Most recent first; uid breaks date ties.
        std::sort(uids.begin(), uids.end(), [&](const std::string& a, const std::string& b) {
            const auto& ra = out.index.at(a);
            const auto& rb = out.index.at(b);
            if (!(ra.study_date == rb.study_date)) return rb.study_date < ra.study_date;
            return a < b;
        });
        return uids;
    };

    auto sample_distinct = [&](std::vector<std::string> pool, size_t k) {
        for (size_t i = 0; i < k && i < pool.size(); ++i) {
            size_t j = i + size_t(content_rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(std::min(k, pool.size()));
        return pool;
    };

    auto patients_of = [&](const std::vector<std::string>& uids) {
        std::set<std::string> s;
        for (const auto& uid : uids) s.insert(out.index.at(uid).patient_id);
        return s;
    };
    auto modalities_of = [&](const std::vector<std::string>& uids) {
        std::set<std::string> s;
        for (const auto& uid : uids) s.insert(out.index.at(uid).modality.token());
        return s;
    };

    // Swap one pick for a pool entry with a different patient, if any exists.
    auto diversify_patient = [&](std::vector<std::string>& picks,
                                 const std::vector<std::string>& pool) {
        if (picks.empty() || patients_of(picks).size() >= 2) return;
        const std::string& patient = out.index.at(picks[0]).patient_id;
        for (const auto& uid : pool) {
            if (out.index.at(uid).patient_id != patient &&
                std::find(picks.begin(), picks.end(), uid) == picks.end()) {
                picks.back() = uid;
                return;
            }
        }
    };
    auto diversify_modality = [&](std::vector<std::string>& picks,
                                  const std::vector<std::string>& pool) {
        if (picks.size() < 2 || modalities_of(picks).size() >= 2) return;
        const std::string modality = out.index.at(picks[0]).modality.token();
        for (const auto& uid : pool) {
            if (out.index.at(uid).modality.token() != modality &&
                std::find(picks.begin(), picks.end(), uid) == picks.end()) {
                // Replace the entry whose patient is redundant, keeping
                // patient diversity intact when possible.
                for (size_t i = picks.size(); i-- > 0;) {
                    std::vector<std::string> trial = picks;
                    trial[i] = uid;
                    if (patients_of(trial).size() >= 2) {
                        picks = trial;
                        return;
                    }
                }
                picks.back() = uid;
                return;
            }
        }
    };

    auto month_window = [&](const CivilDate& day, int days_back) {
        return DateRange{CivilDate::from_days(day.days_since_epoch() - days_back), day};
    };

    for (size_t oi : order) {
        PendingSession& s = sessions[oi];
        const CivilDate session_date = CivilDate::from_seconds(s.start_ts);
        switch (s.intended) {
        case UsagePattern::PatientRevising: {
            std::vector<std::string> eligible;
            std::string pid;
            for (int attempt = 0; attempt < 20 && eligible.empty(); ++attempt) {
                pid = patients[patient_zipf.sample(content_rng)].id;
                eligible = eligible_of_patient(pid, session_date);
            }
            if (eligible.empty()) {
                for (const auto& p : patients) {
                    eligible = eligible_of_patient(p.id, session_date);
                    if (!eligible.empty()) {
                        pid = p.id;
                        break;
                    }
                }
            }
            s.query.patient_id = pid;
            size_t k = std::min<size_t>(size_t(s.k), eligible.size());
            s.retrieve_uids.assign(eligible.begin(), eligible.begin() + std::ptrdiff_t(k));
            break;
        }
        case UsagePattern::ModalityRevising: {
            std::vector<std::string> pool;
            QuerySpec q;
            for (int attempt = 0; attempt < 20; ++attempt) {
                q = QuerySpec{};
                q.modality =
                    Modality(modality_profiles()[weighted_pick(content_rng, modality_profiles())]
                                 .token);
                q.study_date_range = month_window(session_date, 31);
                pool = out.index.query(q);
                if (pool.size() >= 2 && patients_of(pool).size() >= 2) break;
            }
            if (pool.size() < 2 || patients_of(pool).size() < 2) {
                // Thin window (tiny repos, early trace): look a year back.
                q.study_date_range = month_window(session_date, 365);
                pool = out.index.query(q);
            }
            s.query = q;
            s.retrieve_uids = sample_distinct(pool, size_t(s.k));
            diversify_patient(s.retrieve_uids, pool);
            break;
        }
        case UsagePattern::InconsequentQuery: {
            if (content_rng.bernoulli(0.5)) {
                s.query.patient_id = patients[patient_zipf.sample(content_rng)].id;
            } else {
                s.query.modality =
                    Modality(modality_profiles()[weighted_pick(content_rng, modality_profiles())]
                                 .token);
                s.query.study_date_range = month_window(session_date, 31);
            }
            break;
        }
        case UsagePattern::Other: {
            std::vector<std::string> pool;
            QuerySpec q;
            for (int attempt = 0; attempt < 20; ++attempt) {
                q = QuerySpec{};
                if (content_rng.bernoulli(0.5)) {
                    // Weight body parts by the repository mixture via a
                    // random study's body part.
                    size_t si = size_t(content_rng.below(studies.size()));
                    q.body_part = studies[si].body_part;
                } else {
                    q.study_date_range =
                        DateRange{CivilDate::from_days(session_date.days_since_epoch() - 90),
                                  CivilDate::from_days(session_date.days_since_epoch() - 30)};
                }
                pool.clear();
                for (const auto& uid : out.index.query(q))
                    if (out.index.at(uid).study_date <= session_date) pool.push_back(uid);
                if (pool.size() >= 2 && patients_of(pool).size() >= 2 &&
                    modalities_of(pool).size() >= 2)
                    break;
            }
            s.query = q;
            s.retrieve_uids = sample_distinct(pool, size_t(s.k));
            diversify_patient(s.retrieve_uids, pool);
            diversify_modality(s.retrieve_uids, pool);
            break;
        }
        }
        if (s.query.empty()) {
            // Unreachable for sane configs; keep the trace valid regardless.
            s.query.patient_id = patients[0].id;
        }
    }

    // --- Assemble the trace -------------------------------------------------
    struct Emitted {
        int64_t ts;
        size_t session;
        int retrieve_index; // -1 for the query itself
    };
    std::vector<Emitted> emitted;
    for (const PendingSession& s : sessions) {
        emitted.push_back({s.start_ts, s.seq, -1});
        int64_t t = s.start_ts;
        for (size_t r = 0; r < s.retrieve_uids.size(); ++r) {
            t += s.think_seconds[r];
            emitted.push_back({t, s.seq, int(r)});
        }
    }
    std::sort(emitted.begin(), emitted.end(), [](const Emitted& a, const Emitted& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (a.session != b.session) return a.session < b.session;
        return a.retrieve_index < b.retrieve_index;
    });

    std::vector<int64_t> qid_of(sessions.size(), -1);
    int64_t next_qid = 0;
    out.events.reserve(emitted.size());
    for (const Emitted& e : emitted) {
        const PendingSession& s = sessions[e.session];
        std::string ae = "WS" + std::to_string(s.workstation + 1);
        if (e.retrieve_index < 0) {
            qid_of[e.session] = next_qid++;
            out.events.push_back(TraceEvent::make_query(e.ts, std::move(ae), s.query));
        } else {
            out.events.push_back(TraceEvent::make_retrieve(
                e.ts, std::move(ae), s.retrieve_uids[size_t(e.retrieve_index)],
                qid_of[e.session]));
        }
    }

    // Ground truth is the labelling rule applied to what was actually
    // emitted, so fallback paths stay honest.
    std::vector<std::pair<int64_t, UsagePattern>> truth;
    for (const PendingSession& s : sessions) {
        std::vector<const StudyRecord*> records;
        for (const auto& uid : s.retrieve_uids) records.push_back(&out.index.at(uid));
        truth.push_back({qid_of[s.seq], label_from_records(records)});
    }
    std::sort(truth.begin(), truth.end());
    for (const auto& [qid, cls] : truth) out.labels.push_back({qid, cls});

    return out;
}

} // namespace migsim
