#include "worldsync/cluster.hpp"

#include "worldsync/error.hpp"
#include "worldsync/wire.hpp"

#include <algorithm>

namespace worldsync::cluster {

uint64_t flow_hash(const FlowKey& key)
{
    wire::ByteWriter w;
    w.u32(key.src_node);
    w.u16(key.src_port);
    w.u32(key.dst_node);
    w.u16(key.dst_port);
    return fnv1a64(w.view().data(), w.view().size());
}

void BackendPool::add_backend(BackendId backend)
{
    if (std::find(backends_.begin(), backends_.end(), backend) != backends_.end())
        raise(Errc::invalid_argument, "backend " + std::to_string(backend) + " already in pool");
    backends_.push_back(backend);
    health_[backend] = Health::Up;
}

void BackendPool::mark_down(BackendId backend)
{
    const auto it = health_.find(backend);
    if (it == health_.end())
        raise(Errc::invalid_argument, "backend " + std::to_string(backend) + " not in pool");
    it->second = Health::Down;
    std::erase_if(affinity_, [backend](const auto& entry) { return entry.second.backend == backend; });
}

void BackendPool::mark_up(BackendId backend)
{
    const auto it = health_.find(backend);
    if (it == health_.end())
        raise(Errc::invalid_argument, "backend " + std::to_string(backend) + " not in pool");
    it->second = Health::Up;
}

Health BackendPool::health(BackendId backend) const
{
    const auto it = health_.find(backend);
    return it == health_.end() ? Health::Down : it->second;
}

std::vector<BackendId> BackendPool::up_backends() const
{
    std::vector<BackendId> up;
    for (const BackendId backend : backends_)
        if (health_.at(backend) == Health::Up)
            up.push_back(backend);
    return up;
}

BackendId BackendPool::pick_hashed(const FlowKey& key) const
{
    const auto up = up_backends();
    if (up.empty())
        raise(Errc::no_backend_available, "no Up backend");
    return up[flow_hash(key) % up.size()];
}

BackendId BackendPool::route_round_robin()
{
    const auto up = up_backends();
    if (up.empty())
        raise(Errc::no_backend_available, "no Up backend");
    return up[rr_counter_++ % up.size()];
}

BackendId BackendPool::route(const FlowKey& key, double now_ms)
{
    if (policy_ == Policy::RoundRobin)
        return route_round_robin();

    if (const auto it = affinity_.find(key); it != affinity_.end()) {
        const bool expired = idle_expiry_ms_ > 0.0 && now_ms - it->second.last_seen_ms > idle_expiry_ms_;
        if (!expired) {
            it->second.last_seen_ms = now_ms;
            return it->second.backend;
        }
        affinity_.erase(it);
    }
    const BackendId backend = pick_hashed(key);
    affinity_[key] = AffinityEntry { backend, now_ms };
    return backend;
}

} // namespace worldsync::cluster
