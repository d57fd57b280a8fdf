// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "migsim/errors.hpp"

namespace migsim {

// ---------------------------------------------------------------------------
// Calendar dates. Trace timestamps are integer seconds since the Unix epoch;
// dates are whole civil days (UTC, no timezones anywhere in the simulator).
// ---------------------------------------------------------------------------

struct CivilDate {
    int year = 1970;
    unsigned month = 1; // 1..12
    unsigned day = 1;   // 1..31

    bool ok() const {
        std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
        return ymd.ok();
    }

    int64_t days_since_epoch() const {
        std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
        return std::chrono::sys_days{ymd}.time_since_epoch().count();
    }

    int64_t seconds_since_epoch() const { return days_since_epoch() * 86400; }

    static CivilDate from_days(int64_t days) {
        std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
        return CivilDate{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
    }

    static CivilDate from_seconds(int64_t ts) {
        // Floor division so negative timestamps land on the right day.
        int64_t days = ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
        return from_days(days);
    }

    // "YYYY-MM-DD"; throws ParseError on malformed or non-existent dates.
    static CivilDate parse(std::string_view s) {
        CivilDate d;
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            throw ParseError("bad date '" + std::string(s) + "', expected YYYY-MM-DD");
        auto num = [&](size_t pos, size_t len) {
            int v = 0;
            for (size_t i = pos; i < pos + len; ++i) {
                if (s[i] < '0' || s[i] > '9')
                    throw ParseError("bad date '" + std::string(s) + "'");
                v = v * 10 + (s[i] - '0');
            }
            return v;
        };
        d.year = num(0, 4);
        d.month = unsigned(num(5, 2));
        d.day = unsigned(num(8, 2));
        if (!d.ok())
            throw ParseError("non-existent date '" + std::string(s) + "'");
        return d;
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
        return buf;
    }

    auto operator<=>(const CivilDate& o) const = default;
};

// Completed years between birth and a later date (floor; birthday counted).
inline int age_years(const CivilDate& birth, const CivilDate& at) {
    int a = at.year - birth.year;
    if (std::pair{at.month, at.day} < std::pair{birth.month, birth.day}) --a;
    return a;
}

inline int age_years_at_ts(const CivilDate& birth, int64_t ts) {
    return age_years(birth, CivilDate::from_seconds(ts));
}

// ---------------------------------------------------------------------------
// Closed token enums with an escape hatch: unknown tokens are preserved
// verbatim so ingestion never aborts on vendor-specific values.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Derived, size_t N>
class TokenEnum {
public:
    TokenEnum() : token_(Derived::known()[0]) {}
    explicit TokenEnum(std::string_view token) : token_(token) {}

    const std::string& token() const { return token_; }

    // Index into the one-hot layout: known tokens map to their position,
    // anything else shares the trailing "other" slot.
    size_t index() const {
        const auto& k = Derived::known();
        for (size_t i = 0; i < N; ++i)
            if (k[i] == token_) return i;
        return N;
    }

    bool is_known() const { return index() < N; }
    static constexpr size_t known_count() { return N; }
    static constexpr size_t onehot_size() { return N + 1; }

    bool operator==(const TokenEnum& o) const { return token_ == o.token_; }
    auto operator<=>(const TokenEnum& o) const { return token_ <=> o.token_; }

private:
    std::string token_;
};

} // namespace detail

class Modality : public detail::TokenEnum<Modality, 6> {
public:
    using TokenEnum::TokenEnum;
    static const std::array<std::string_view, 6>& known() {
        static const std::array<std::string_view, 6> k = {"CT", "MR", "US", "CR", "XA", "DX"};
        return k;
    }
};

class BodyPart : public detail::TokenEnum<BodyPart, 8> {
public:
    using TokenEnum::TokenEnum;
    static const std::array<std::string_view, 8>& known() {
        static const std::array<std::string_view, 8> k = {"CHEST", "HEAD",  "ABDOMEN", "PELVIS",
                                                          "SPINE", "KNEE",  "BREAST",  "NECK"};
        return k;
    }
};

enum class Sex { M, F, O };

inline Sex parse_sex(std::string_view s) {
    if (s == "M") return Sex::M;
    if (s == "F") return Sex::F;
    if (s == "O") return Sex::O;
    throw ParseError("bad sex token '" + std::string(s) + "'");
}

inline const char* to_string(Sex s) {
    switch (s) {
    case Sex::M: return "M";
    case Sex::F: return "F";
    default: return "O";
    }
}

// ---------------------------------------------------------------------------
// Usage behavior classes assigned to query sessions.
// ---------------------------------------------------------------------------

enum class UsagePattern : int {
    PatientRevising = 1,
    ModalityRevising = 2,
    InconsequentQuery = 3,
    Other = 4,
};

inline UsagePattern usage_pattern_from_index(int i) {
    if (i < 1 || i > 4)
        throw ParseError("usage pattern class out of range: " + std::to_string(i));
    return static_cast<UsagePattern>(i);
}

inline int index_of(UsagePattern p) { return static_cast<int>(p); }

// ---------------------------------------------------------------------------
// Study metadata: the unit of caching and prefetching.
// ---------------------------------------------------------------------------

struct StudyRecord {
    std::string study_uid;
    std::string patient_id;
    Sex patient_sex = Sex::O;
    CivilDate patient_birth_date;
    Modality modality;
    BodyPart body_part;
    std::string institution;
    CivilDate study_date;
    uint64_t size_bytes = 0;
    uint32_t num_images = 1;

    void validate() const {
        if (study_uid.empty()) throw ConfigError("StudyRecord.study_uid: empty");
        if (patient_id.empty()) throw ConfigError("StudyRecord.patient_id: empty");
        if (size_bytes == 0) throw ConfigError("StudyRecord.size_bytes: must be > 0");
        if (num_images < 1) throw ConfigError("StudyRecord.num_images: must be >= 1");
        if (!patient_birth_date.ok()) throw ConfigError("StudyRecord.patient_birth_date: invalid");
        if (!study_date.ok()) throw ConfigError("StudyRecord.study_date: invalid");
    }
};

// ---------------------------------------------------------------------------
// Queries and trace events.
// ---------------------------------------------------------------------------

struct DateRange {
    CivilDate from;
    CivilDate to;
    bool ok() const { return from.ok() && to.ok() && from <= to; }
};

struct QuerySpec {
    std::optional<std::string> patient_id;
    std::optional<Modality> modality;
    std::optional<DateRange> study_date_range;
    std::optional<BodyPart> body_part;
    std::optional<std::string> institution;

    bool empty() const {
        return !patient_id && !modality && !study_date_range && !body_part && !institution;
    }

    void validate() const {
        if (empty()) throw ConfigError("QuerySpec: at least one key must be present");
        if (study_date_range && !study_date_range->ok())
            throw ConfigError("QuerySpec.study_date_range: start must be <= end");
    }

    bool matches(const StudyRecord& r) const {
        if (patient_id && r.patient_id != *patient_id) return false;
        if (modality && !(r.modality == *modality)) return false;
        if (body_part && !(r.body_part == *body_part)) return false;
        if (institution && r.institution != *institution) return false;
        if (study_date_range &&
            (r.study_date < study_date_range->from || study_date_range->to < r.study_date))
            return false;
        return true;
    }
};

enum class EventKind { Query, Retrieve };

// One C-Find-like query or C-Move-like retrieve from a named node. Exactly
// one of {query, study_uid} is populated, matching kind; the factory
// functions keep that invariant.
struct TraceEvent {
    int64_t ts = 0;
    std::string aetitle;
    EventKind kind = EventKind::Query;
    std::optional<QuerySpec> query;
    std::optional<std::string> study_uid;
    std::optional<int64_t> query_id; // retrieve -> originating query, may be absent

    static TraceEvent make_query(int64_t ts, std::string aetitle, QuerySpec q) {
        q.validate();
        TraceEvent e;
        e.ts = ts;
        e.aetitle = std::move(aetitle);
        e.kind = EventKind::Query;
        e.query = std::move(q);
        return e;
    }

    static TraceEvent make_retrieve(int64_t ts, std::string aetitle, std::string uid,
                                    std::optional<int64_t> qid = std::nullopt) {
        TraceEvent e;
        e.ts = ts;
        e.aetitle = std::move(aetitle);
        e.kind = EventKind::Retrieve;
        e.study_uid = std::move(uid);
        e.query_id = qid;
        return e;
    }
};

// ---------------------------------------------------------------------------
// Repository index: uid -> record plus secondary lookups.
// ---------------------------------------------------------------------------

class RepositoryIndex {
public:
    void add(StudyRecord record) {
        record.validate();
        auto uid = record.study_uid;
        auto [it, inserted] = by_uid_.emplace(uid, std::move(record));
        if (!inserted) throw ConfigError("duplicate study_uid '" + uid + "'");
        total_bytes_ += it->second.size_bytes;
        by_patient_[it->second.patient_id].push_back(uid);
        by_modality_[it->second.modality.token()].push_back(uid);
    }

    const StudyRecord* find(const std::string& uid) const {
        auto it = by_uid_.find(uid);
        return it == by_uid_.end() ? nullptr : &it->second;
    }

    const StudyRecord& at(const std::string& uid) const {
        const StudyRecord* r = find(uid);
        if (!r) throw NotFoundError("study_uid '" + uid + "' not in repository index");
        return *r;
    }

    bool contains(const std::string& uid) const { return by_uid_.count(uid) != 0; }
    size_t size() const { return by_uid_.size(); }
    uint64_t total_bytes() const { return total_bytes_; }
    const std::map<std::string, StudyRecord>& records() const { return by_uid_; }

    // All uids matching the query keys, sorted ascending for determinism.
    std::vector<std::string> query(const QuerySpec& spec) const {
        spec.validate();
        std::vector<std::string> out;
        auto consider = [&](const std::string& uid) {
            const StudyRecord& r = by_uid_.at(uid);
            if (spec.matches(r)) out.push_back(uid);
        };
        if (spec.patient_id) {
            auto it = by_patient_.find(*spec.patient_id);
            if (it != by_patient_.end())
                for (const auto& uid : it->second) consider(uid);
        } else if (spec.modality) {
            auto it = by_modality_.find(spec.modality->token());
            if (it != by_modality_.end())
                for (const auto& uid : it->second) consider(uid);
        } else {
            for (const auto& [uid, r] : by_uid_)
                if (spec.matches(r)) out.push_back(uid);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::string> uids_of_patient(const std::string& patient) const {
        auto it = by_patient_.find(patient);
        return it == by_patient_.end() ? std::vector<std::string>{} : it->second;
    }

    std::vector<std::string> uids_of_modality(const std::string& token) const {
        auto it = by_modality_.find(token);
        return it == by_modality_.end() ? std::vector<std::string>{} : it->second;
    }

    const std::map<std::string, std::vector<std::string>>& patients() const {
        return by_patient_;
    }

private:
    std::map<std::string, StudyRecord> by_uid_;
    std::map<std::string, std::vector<std::string>> by_patient_;
    std::map<std::string, std::vector<std::string>> by_modality_;
    uint64_t total_bytes_ = 0;
};

// ---------------------------------------------------------------------------
// Trace validation. Report-carrying: never throws, a valid trace yields an
// empty report.
// ---------------------------------------------------------------------------

struct ValidationFinding {
    enum class Kind { MissingStudy, TimestampInversion, MalformedQuery, MalformedEvent };
    Kind kind;
    size_t event_index;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;
    bool empty() const { return findings.empty(); }

    std::string to_string() const {
        std::string s;
        for (const auto& f : findings)
            s += "event " + std::to_string(f.event_index) + ": " + f.message + "\n";
        return s;
    }
};

inline ValidationReport validate_trace(const std::vector<TraceEvent>& events,
                                       const RepositoryIndex& index) {
    ValidationReport report;
    int64_t prev_ts = INT64_MIN;
    for (size_t i = 0; i < events.size(); ++i) {
        const TraceEvent& e = events[i];
        if (e.ts < prev_ts)
            report.findings.push_back({ValidationFinding::Kind::TimestampInversion, i,
                                       "timestamp " + std::to_string(e.ts) +
                                           " precedes previous " + std::to_string(prev_ts)});
        prev_ts = std::max(prev_ts, e.ts);
        if (e.kind == EventKind::Query) {
            if (!e.query || e.study_uid)
                report.findings.push_back({ValidationFinding::Kind::MalformedEvent, i,
                                           "query event must carry a query and no uid"});
            else if (e.query->empty())
                report.findings.push_back({ValidationFinding::Kind::MalformedQuery, i,
                                           "query has no keys"});
            else if (e.query->study_date_range && !e.query->study_date_range->ok())
                report.findings.push_back({ValidationFinding::Kind::MalformedQuery, i,
                                           "query date range start exceeds end"});
        } else {
            if (!e.study_uid || e.query)
                report.findings.push_back({ValidationFinding::Kind::MalformedEvent, i,
                                           "retrieve event must carry a uid and no query"});
            else if (!index.contains(*e.study_uid))
                report.findings.push_back({ValidationFinding::Kind::MissingStudy, i,
                                           "study_uid '" + *e.study_uid +
                                               "' not in repository index"});
        }
    }
    return report;
}

} // namespace migsim
