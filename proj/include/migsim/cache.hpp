// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "migsim/errors.hpp"

namespace migsim {

enum class CacheOrigin { Passive, ShortTermPrefetch, LongTermPrefetch };

inline const char* to_string(CacheOrigin o) {
    switch (o) {
    case CacheOrigin::Passive: return "passive";
    case CacheOrigin::ShortTermPrefetch: return "short_term_prefetch";
    default: return "long_term_prefetch";
    }
}

struct CacheEntry {
    std::string study_uid;
    uint64_t size_bytes = 0;
    double inserted_at = 0.0;
    double last_access_at = 0.0;
    CacheOrigin origin = CacheOrigin::Passive;
};

// Recency weight in [0, 100]: 100 for the newest access in cache, 0 for the
// oldest, linear in between. A degenerate span (single entry, or everything
// touched in the same instant) weighs 100.
inline double lru_weight(const CacheEntry& entry, double oldest_access, double newest_access) {
    if (entry.last_access_at < oldest_access || entry.last_access_at > newest_access)
        throw std::invalid_argument("lru_weight: entry access time outside [oldest, newest]");
    if (newest_access == oldest_access) return 100.0;
    return 100.0 * (entry.last_access_at - oldest_access) / (newest_access - oldest_access);
}

// Byte-capacity cache of study metadata with watermark-batched eviction in
// ascending recency-weight order. Ascending weight equals ascending
// last-access time, so victims are maintained as a classic LRU list: front
// is the eviction candidate, back is the most recent access. Same-instant
// accesses keep their touch order, which fixes a deterministic victim among
// equal weights.
class StudyCache {
public:
    enum class AdmitStatus { Admitted, AlreadyPresent, Rejected };

    struct AdmitResult {
        AdmitStatus status = AdmitStatus::Admitted;
        std::vector<std::string> evicted; // coldest first
    };

    StudyCache(uint64_t capacity_bytes, double high_watermark = 0.95,
               double low_watermark = 0.85)
        : capacity_(capacity_bytes), high_(high_watermark), low_(low_watermark) {
        if (capacity_ == 0) throw ConfigError("cache.capacity_bytes: must be > 0");
        if (!(high_ > 0.0 && high_ <= 1.0))
            throw ConfigError("cache.high_watermark: must be in (0, 1]");
        if (!(low_ > 0.0 && low_ < high_))
            throw ConfigError("cache.low_watermark: must be in (0, high_watermark)");
    }

    // Inserts a study as the newest entry. When the new occupancy would pass
    // the high watermark, evicts coldest entries until it drops to the low
    // watermark; the incoming study itself is never a victim. Studies larger
    // than the whole cache are rejected untouched. Admitting a resident uid
    // just refreshes its recency.
    AdmitResult admit(const std::string& uid, uint64_t size_bytes, double now,
                      CacheOrigin origin) {
        AdmitResult result;
        if (size_bytes > capacity_) {
            result.status = AdmitStatus::Rejected;
            return result;
        }
        if (touch(uid, now)) {
            result.status = AdmitStatus::AlreadyPresent;
            return result;
        }
        if (double(used_ + size_bytes) > high_ * double(capacity_)) {
            while (!recency_.empty() && double(used_ + size_bytes) > low_ * double(capacity_))
                result.evicted.push_back(evict_coldest());
        }
        recency_.push_back(uid);
        CacheEntry entry{uid, size_bytes, now, now, origin};
        entries_.emplace(uid, Slot{entry, std::prev(recency_.end())});
        used_ += size_bytes;
        return result;
    }

    // Refreshes recency on a hit. A false return is the miss signal, not an
    // error; the caller decides what a miss means.
    bool touch(const std::string& uid, double now) {
        auto it = entries_.find(uid);
        if (it == entries_.end()) return false;
        it->second.entry.last_access_at = now;
        recency_.splice(recency_.end(), recency_, it->second.position);
        return true;
    }

    bool contains(const std::string& uid) const { return entries_.count(uid) != 0; }

    const CacheEntry* find(const std::string& uid) const {
        auto it = entries_.find(uid);
        return it == entries_.end() ? nullptr : &it->second.entry;
    }

    void set_origin(const std::string& uid, CacheOrigin origin) {
        auto it = entries_.find(uid);
        if (it == entries_.end())
            throw NotFoundError("study_uid '" + uid + "' not cached");
        it->second.entry.origin = origin;
    }

    uint64_t capacity_bytes() const { return capacity_; }
    uint64_t used_bytes() const { return used_; }
    uint64_t free_space() const { return capacity_ - used_; }
    size_t size() const { return entries_.size(); }
    uint64_t evictions() const { return evictions_; }
    double high_watermark() const { return high_; }
    double low_watermark() const { return low_; }

    // The uid the next eviction would pick, if any.
    const std::string* coldest() const { return recency_.empty() ? nullptr : &recency_.front(); }

    double oldest_access() const {
        require_nonempty();
        return entries_.at(recency_.front()).entry.last_access_at;
    }

    double newest_access() const {
        require_nonempty();
        return entries_.at(recency_.back()).entry.last_access_at;
    }

    double weight_of(const std::string& uid) const {
        auto it = entries_.find(uid);
        if (it == entries_.end())
            throw NotFoundError("study_uid '" + uid + "' not cached");
        return lru_weight(it->second.entry, oldest_access(), newest_access());
    }

    // Entries sorted by uid, for dumps and consistency checks.
    std::vector<CacheEntry> snapshot() const {
        std::vector<CacheEntry> out;
        out.reserve(entries_.size());
        for (const auto& [uid, slot] : entries_) out.push_back(slot.entry);
        return out;
    }

private:
    struct Slot {
        CacheEntry entry;
        std::list<std::string>::iterator position;
    };

    std::string evict_coldest() {
        std::string uid = recency_.front();
        recency_.pop_front();
        auto it = entries_.find(uid);
        used_ -= it->second.entry.size_bytes;
        entries_.erase(it);
        ++evictions_;
        return uid;
    }

    void require_nonempty() const {
        if (entries_.empty()) throw NotFoundError("cache is empty");
    }

    uint64_t capacity_;
    double high_;
    double low_;
    uint64_t used_ = 0;
    uint64_t evictions_ = 0;
    std::list<std::string> recency_; // front = coldest
    std::map<std::string, Slot> entries_;
};

} // namespace migsim
