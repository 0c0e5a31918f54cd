#pragma once

#include "worldsync/net.hpp"
#include "worldsync/rng.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace worldsync::cluster {

using BackendId = uint32_t;

// The only session identity UDP offers a balancer: source and destination
// (address, port) pairs. Two users behind one NAT present the same key and
// are indistinguishable.
struct FlowKey {
    uint32_t src_node = 0;
    uint16_t src_port = 0;
    uint32_t dst_node = 0;
    uint16_t dst_port = 0;

    auto operator<=>(const FlowKey&) const = default;

    static FlowKey from(const net::Address& src, const net::Address& dst)
    {
        return { src.node, src.port, dst.node, dst.port };
    }
};

// 64-bit FNV-1a over the canonical 12-byte big-endian encoding.
uint64_t flow_hash(const FlowKey& key);

enum class Policy : uint8_t {
    RoundRobin,
    FlowHash,
};

enum class Health : uint8_t {
    Up,
    Down,
};

struct AffinityEntry {
    BackendId backend = 0;
    double last_seen_ms = 0.0;
};

// Routing policy over a fleet of backends. RoundRobin rotates strictly over
// Up backends (stateless requests only); FlowHash pins each flow to
// hash(key) mod |Up| and keeps the affinity until expiry or failover.
class BackendPool {
public:
    explicit BackendPool(Policy policy, double affinity_idle_expiry_ms = 30000.0)
        : policy_(policy)
        , idle_expiry_ms_(affinity_idle_expiry_ms) // 0 disables expiry
    {
    }

    void add_backend(BackendId backend);
    void mark_down(BackendId backend); // purges that backend's affinity entries
    void mark_up(BackendId backend);
    Health health(BackendId backend) const;

    std::vector<BackendId> up_backends() const;
    size_t backend_count() const { return backends_.size(); }

    BackendId route(const FlowKey& key, double now_ms); // throws NoBackendAvailable
    BackendId route_round_robin(); // keyless stateless-request path

    const std::map<FlowKey, AffinityEntry>& affinity() const { return affinity_; }
    void drop_affinity(const FlowKey& key) { affinity_.erase(key); }

    Policy policy() const { return policy_; }

private:
    BackendId pick_hashed(const FlowKey& key) const;

    Policy policy_;
    double idle_expiry_ms_;
    std::vector<BackendId> backends_; // insertion order
    std::map<BackendId, Health> health_;
    std::map<FlowKey, AffinityEntry> affinity_;
    uint64_t rr_counter_ = 0;
};

} // namespace worldsync::cluster
