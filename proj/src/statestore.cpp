#include "worldsync/statestore.hpp"

#include "worldsync/error.hpp"

#include <algorithm>

namespace worldsync::store {

void StateStore::check_available() const
{
    if (!available_)
        raise(Errc::store_unavailable, "store outage");
}

GetResult CpStore::get(const std::string& key)
{
    check_available();
    GetResult out;
    out.charge_ms = profile_.read_latency_ms;
    if (const auto it = data_.find(key); it != data_.end())
        out.record = it->second;
    return out;
}

PutResult CpStore::put(const std::string& key, std::vector<uint8_t> value)
{
    check_available();
    Record& record = data_[key];
    record.value = std::move(value);
    ++record.version;
    return { record.version, profile_.write_latency_ms };
}

CasResult CpStore::cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value)
{
    check_available();
    const auto it = data_.find(key);
    const uint64_t current = it == data_.end() ? 0 : it->second.version;
    if (current != expected_version)
        return { false, current, profile_.write_latency_ms };
    Record& record = data_[key];
    record.value = std::move(value);
    ++record.version;
    return { true, record.version, profile_.write_latency_ms };
}

GetResult ApStore::get(const std::string& key)
{
    check_available();
    GetResult out;
    out.charge_ms = profile_.read_latency_ms;
    const auto it = history_.find(key);
    if (it == history_.end())
        return out;

    const double lag = profile_.staleness_ms > 0.0 ? rng_.range(0.0, profile_.staleness_ms) : 0.0;
    const double cutoff = now_ms_() - lag;
    // Latest version committed on or before the cutoff.
    const Version* chosen = nullptr;
    for (const Version& version : it->second) {
        if (version.commit_ms <= cutoff)
            chosen = &version;
        else
            break;
    }
    if (chosen)
        out.record = chosen->record;
    return out;
}

PutResult ApStore::put(const std::string& key, std::vector<uint8_t> value)
{
    check_available();
    auto& versions = history_[key];
    const uint64_t next = versions.empty() ? 1 : versions.back().record.version + 1;
    versions.push_back({ { std::move(value), next }, now_ms_() });
    return { next, profile_.write_latency_ms };
}

CasResult ApStore::cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value)
{
    check_available();
    auto& versions = history_[key];
    const uint64_t current = versions.empty() ? 0 : versions.back().record.version;
    if (current != expected_version)
        return { false, current, profile_.write_latency_ms };
    versions.push_back({ { std::move(value), current + 1 }, now_ms_() });
    return { true, current + 1, profile_.write_latency_ms };
}

std::map<std::string, Record> ApStore::dump() const
{
    std::map<std::string, Record> out;
    for (const auto& [key, versions] : history_)
        if (!versions.empty())
            out.emplace(key, versions.back().record);
    return out;
}

GetResult WriteThroughCache::get(const std::string& key)
{
    if (const auto it = entries_.find(key); it != entries_.end()) {
        ++hits_;
        order_.splice(order_.begin(), order_, it->second.second);
        return { it->second.first, 0.0 };
    }
    ++misses_;
    GetResult result = backing_.get(key);
    if (result.record)
        touch(key, *result.record);
    return result;
}

PutResult WriteThroughCache::put(const std::string& key, std::vector<uint8_t> value)
{
    // Store first, then cache: the cache never holds a value the store
    // has not committed.
    PutResult result = backing_.put(key, value);
    touch(key, Record { std::move(value), result.version });
    return result;
}

CasResult WriteThroughCache::cas(const std::string& key, uint64_t expected_version, std::vector<uint8_t> value)
{
    CasResult result = backing_.cas(key, expected_version, value);
    if (result.ok)
        touch(key, Record { std::move(value), result.version });
    return result;
}

void WriteThroughCache::flush()
{
    entries_.clear();
    order_.clear();
}

void WriteThroughCache::touch(const std::string& key, Record record)
{
    if (const auto it = entries_.find(key); it != entries_.end()) {
        it->second.first = std::move(record);
        order_.splice(order_.begin(), order_, it->second.second);
        return;
    }
    order_.push_front(key);
    entries_.emplace(key, std::make_pair(std::move(record), order_.begin()));
    if (entries_.size() > capacity_) {
        entries_.erase(order_.back());
        order_.pop_back();
    }
}

} // namespace worldsync::store
