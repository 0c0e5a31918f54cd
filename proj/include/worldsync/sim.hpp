#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace worldsync::sim {

// Discrete-event core. All timestamps in a run derive from this clock; it
// advances only by executing scheduled events or by run_until. Ties are
// broken by scheduling order, which makes every run with equal inputs
// replay the exact same event order.
class Sim {
public:
    double now_ms() const { return now_; }

    void schedule(double time_ms, std::function<void()> fn)
    {
        if (time_ms < now_)
            time_ms = now_;
        queue_.push(Event { time_ms, next_order_++, std::move(fn) });
    }

    // Executes every event with time <= time_ms, then parks the clock at
    // time_ms. Events scheduled while running are honored in the same pass.
    void run_until(double time_ms)
    {
        while (!queue_.empty() && queue_.top().time <= time_ms) {
            Event ev = std::move(const_cast<Event&>(queue_.top()));
            queue_.pop();
            now_ = ev.time;
            ev.fn();
        }
        if (time_ms > now_)
            now_ = time_ms;
    }

    bool idle() const { return queue_.empty(); }
    size_t pending() const { return queue_.size(); }

private:
    struct Event {
        double time;
        uint64_t order;
        std::function<void()> fn;

        bool operator>(const Event& other) const
        {
            if (time != other.time)
                return time > other.time;
            return order > other.order;
        }
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    double now_ = 0.0;
    uint64_t next_order_ = 0;
};

} // namespace worldsync::sim
