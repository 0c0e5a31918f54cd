#pragma once

#include "worldsync/rng.hpp"
#include "worldsync/sim.hpp"
#include "worldsync/wire.hpp"

#include <compare>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <vector>

namespace worldsync::net {

// (node, port) plays the (IP, port) role: the only flow identity that
// exists on the simulated wire.
struct Address {
    uint32_t node = 0;
    uint16_t port = 0;

    auto operator<=>(const Address&) const = default;
};

struct NetConditions {
    double one_way_latency_ms = 0.0;
    double jitter_ms = 0.0;
    double loss_rate = 0.0;
    double duplicate_rate = 0.0;
    double reorder_rate = 0.0;
};

struct Delivery {
    double time_ms = 0.0;
    Address from;
    Address to;
    wire::Frame frame;
};

class Network;

class Endpoint {
public:
    const Address& address() const { return address_; }

    // Reactive mode: deliveries invoke the handler. Without a handler the
    // endpoint queues into its inbox for polling.
    void set_handler(std::function<void(const Delivery&)> handler) { handler_ = std::move(handler); }

    std::deque<Delivery>& inbox() { return inbox_; }

private:
    friend class Network;

    Address address_;
    std::function<void(const Delivery&)> handler_;
    std::deque<Delivery> inbox_;
};

// Deterministic simulated UDP. Loss, duplication, jitter and reordering are
// drawn from one seeded RNG per directed link, in a fixed documented order,
// so a (send schedule, seed) pair fully determines the delivery schedule.
class Network {
public:
    Network(sim::Sim& sim, uint64_t seed)
        : sim_(sim)
        , seed_(seed)
    {
    }

    Endpoint& create_endpoint(Address address);
    bool has_endpoint(Address address) const { return endpoints_.count(address) != 0; }

    // Dynamic address change: the endpoint keeps its state, frames already
    // in flight toward the old address are lost.
    void rebind(Address old_address, Address new_address);

    void set_default_conditions(const NetConditions& cond) { default_conditions_ = cond; }
    void set_link_conditions(Address from, Address to, const NetConditions& cond) { link_conditions_[{ from, to }] = cond; }
    const NetConditions& conditions(Address from, Address to) const;

    void send(Address from, Address to, wire::Frame frame);

    // Poll API: runs the simulation to until_ms and returns the deliveries
    // that happened since the previous tick, in delivery order.
    std::vector<Delivery> tick(double until_ms);

    sim::Sim& sim() { return sim_; }
    double now_ms() const { return sim_.now_ms(); }

    uint64_t frames_sent() const { return frames_sent_; }
    uint64_t frames_delivered() const { return frames_delivered_; }
    uint64_t frames_dropped() const { return frames_dropped_; }
    uint64_t frames_duplicated() const { return frames_duplicated_; }

private:
    void schedule_delivery(Address from, Address to, const wire::Frame& frame, double arrival_ms);
    DetRng& link_rng(Address from, Address to);

    sim::Sim& sim_;
    uint64_t seed_;
    NetConditions default_conditions_;
    std::map<std::pair<Address, Address>, NetConditions> link_conditions_;
    std::map<std::pair<Address, Address>, std::unique_ptr<DetRng>> link_rngs_;
    std::map<Address, std::unique_ptr<Endpoint>> endpoints_;
    std::set<Address> retired_; // once-registered addresses; traffic to them drops silently
    std::vector<Delivery> since_last_tick_;
    uint64_t frames_sent_ = 0;
    uint64_t frames_delivered_ = 0;
    uint64_t frames_dropped_ = 0;
    uint64_t frames_duplicated_ = 0;
};

// Canonical byte encoding of a directed link, also used to derive the
// link RNG stream.
inline uint64_t link_stream_id(Address from, Address to)
{
    wire::ByteWriter w;
    w.u32(from.node);
    w.u16(from.port);
    w.u32(to.node);
    w.u16(to.port);
    return fnv1a64(w.view().data(), w.view().size());
}

} // namespace worldsync::net
