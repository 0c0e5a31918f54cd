#include "worldsync/net.hpp"

#include "worldsync/error.hpp"

namespace worldsync::net {

Endpoint& Network::create_endpoint(Address address)
{
    auto [it, inserted] = endpoints_.emplace(address, std::make_unique<Endpoint>());
    if (!inserted)
        raise(Errc::invalid_argument, "endpoint address already registered");
    it->second->address_ = address;
    return *it->second;
}

void Network::rebind(Address old_address, Address new_address)
{
    auto it = endpoints_.find(old_address);
    if (it == endpoints_.end())
        raise(Errc::unknown_endpoint, "rebind of unregistered endpoint");
    if (endpoints_.count(new_address))
        raise(Errc::invalid_argument, "rebind target address already registered");
    auto ep = std::move(it->second);
    endpoints_.erase(it);
    retired_.insert(old_address);
    retired_.erase(new_address);
    ep->address_ = new_address;
    endpoints_.emplace(new_address, std::move(ep));
}

const NetConditions& Network::conditions(Address from, Address to) const
{
    const auto it = link_conditions_.find({ from, to });
    return it == link_conditions_.end() ? default_conditions_ : it->second;
}

DetRng& Network::link_rng(Address from, Address to)
{
    auto& slot = link_rngs_[{ from, to }];
    if (!slot)
        slot = std::make_unique<DetRng>(mix_seed(seed_, link_stream_id(from, to)));
    return *slot;
}

// Draw order per sent frame, fixed and relied on by the replay oracle:
//   1. loss draw; a lost frame consumes nothing further.
//   2. jitter draw in [-jitter, +jitter] (consumed only when jitter_ms > 0).
//   3. duplicate draw.
//   4. reorder draw; a reordered frame is held back one extra latency period.
//   5. the duplicate copy, when present, draws its own jitter offset.
void Network::send(Address from, Address to, wire::Frame frame)
{
    // Traffic involving a retired address (a rebound endpoint, a dead
    // socket still retransmitting) drops like real UDP; addresses that
    // never existed are a programming error.
    if (!endpoints_.count(from)) {
        if (retired_.count(from)) {
            ++frames_dropped_;
            return;
        }
        raise(Errc::unknown_endpoint, "send from unregistered endpoint");
    }
    if (!endpoints_.count(to)) {
        if (retired_.count(to)) {
            ++frames_dropped_;
            return;
        }
        raise(Errc::unknown_endpoint, "send to unregistered endpoint");
    }

    ++frames_sent_;
    const NetConditions& cond = conditions(from, to);
    DetRng& rng = link_rng(from, to);

    if (rng.unit() < cond.loss_rate) {
        ++frames_dropped_;
        return;
    }
    const double jitter = cond.jitter_ms > 0.0 ? rng.range(-cond.jitter_ms, cond.jitter_ms) : 0.0;
    const bool duplicated = rng.unit() < cond.duplicate_rate;
    const bool reordered = rng.unit() < cond.reorder_rate;

    double delay = std::max(0.0, cond.one_way_latency_ms + jitter);
    if (reordered)
        delay += cond.one_way_latency_ms;
    schedule_delivery(from, to, frame, sim_.now_ms() + delay);

    if (duplicated) {
        ++frames_duplicated_;
        const double jitter2 = cond.jitter_ms > 0.0 ? rng.range(-cond.jitter_ms, cond.jitter_ms) : 0.0;
        schedule_delivery(from, to, frame, sim_.now_ms() + std::max(0.0, cond.one_way_latency_ms + jitter2));
    }
}

void Network::schedule_delivery(Address from, Address to, const wire::Frame& frame, double arrival_ms)
{
    sim_.schedule(arrival_ms, [this, from, to, frame]() {
        const auto it = endpoints_.find(to);
        if (it == endpoints_.end()) {
            // Destination rebound or gone while the frame was in flight.
            ++frames_dropped_;
            return;
        }
        ++frames_delivered_;
        Delivery delivery { sim_.now_ms(), from, to, frame };
        since_last_tick_.push_back(delivery);
        if (it->second->handler_)
            it->second->handler_(delivery);
        else
            it->second->inbox_.push_back(std::move(delivery));
    });
}

std::vector<Delivery> Network::tick(double until_ms)
{
    sim_.run_until(until_ms);
    return std::exchange(since_last_tick_, {});
}

} // namespace worldsync::net
