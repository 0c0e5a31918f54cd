#pragma once

#include "worldsync/rng.hpp"

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace worldsync::store {

enum class Consistency : uint8_t {
    CP, // linearizable per key, never stale
    AP, // eventually consistent, reads at most staleness_ms old
};

struct StoreProfile {
    double read_latency_ms = 0.0;
    double write_latency_ms = 0.0;
    Consistency consistency = Consistency::CP;
    double staleness_ms = 0.0; // AP only
};

struct Record {
    std::vector<uint8_t> value;
    uint64_t version = 0;

    friend bool operator==(const Record&, const Record&) = default;
};

struct GetResult {
    std::optional<Record> record;
    double charge_ms = 0.0; // simulated latency the caller must absorb
};

struct PutResult {
    uint64_t version = 0;
    double charge_ms = 0.0;
};

struct CasResult {
    bool ok = false;
    uint64_t version = 0; // new version on ok, current version on conflict
    double charge_ms = 0.0;
};

// Versioned key-value store. Versions start at 1 and increase by exactly 1
// per successful write; an absent key has current version 0, so
// cas(key, 0, v) is create-if-absent.
class StateStore {
public:
    virtual ~StateStore() = default;

    virtual GetResult get(const std::string& key) = 0; // throws StoreUnavailable
    virtual PutResult put(const std::string& key, std::vector<uint8_t> value) = 0;
    virtual CasResult cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value) = 0;

    void set_available(bool available) { available_ = available; }
    bool available() const { return available_; }

    virtual std::map<std::string, Record> dump() const = 0;

protected:
    void check_available() const;

    bool available_ = true;
};

// Linearizable per key: in-process and serialized, so every read observes
// the latest committed write.
class CpStore : public StateStore {
public:
    explicit CpStore(StoreProfile profile = {})
        : profile_(profile)
    {
    }

    GetResult get(const std::string& key) override;
    PutResult put(const std::string& key, std::vector<uint8_t> value) override;
    CasResult cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value) override;
    std::map<std::string, Record> dump() const override { return data_; }

    const StoreProfile& profile() const { return profile_; }

private:
    StoreProfile profile_;
    std::map<std::string, Record> data_;
};

// Bounded-staleness reads: each get draws a lag in [0, staleness_ms] and
// observes the key as of (now - lag). Writes are immediately durable.
class ApStore : public StateStore {
public:
    ApStore(StoreProfile profile, std::function<double()> now_ms, uint64_t seed)
        : profile_(profile)
        , now_ms_(std::move(now_ms))
        , rng_(seed)
    {
    }

    GetResult get(const std::string& key) override;
    PutResult put(const std::string& key, std::vector<uint8_t> value) override;
    CasResult cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value) override;
    std::map<std::string, Record> dump() const override;

private:
    struct Version {
        Record record;
        double commit_ms = 0.0;
    };

    StoreProfile profile_;
    std::function<double()> now_ms_;
    DetRng rng_;
    std::map<std::string, std::vector<Version>> history_;
};

// Write-through LRU cache in front of a store. A hit is free of store read
// latency; the cached value always equals the store value at the cached
// version in single-writer traces.
class WriteThroughCache {
public:
    WriteThroughCache(StateStore& backing, size_t capacity)
        : backing_(backing)
        , capacity_(capacity)
    {
    }

    GetResult get(const std::string& key);
    PutResult put(const std::string& key, std::vector<uint8_t> value);
    CasResult cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value);

    void flush();

    uint64_t hits() const { return hits_; }
    uint64_t misses() const { return misses_; }
    size_t size() const { return entries_.size(); }

private:
    void touch(const std::string& key, Record record);

    StateStore& backing_;
    size_t capacity_;
    std::list<std::string> order_; // front = most recent
    std::map<std::string, std::pair<Record, std::list<std::string>::iterator>> entries_;
    uint64_t hits_ = 0;
    uint64_t misses_ = 0;
};

inline std::string object_key(uint32_t object_id)
{
    return "obj/" + std::to_string(object_id);
}

} // namespace worldsync::store
