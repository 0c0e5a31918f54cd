#pragma once

#include "worldsync/wire.hpp"

#include <span>
#include <vector>

namespace worldsync::clocksync {

// Four-timestamp exchange: t0 client send, t1 server receive, t2 server
// reply, t3 client receive. All in milliseconds.
struct ClockSample {
    double t0 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
};

struct ClockEstimate {
    double offset_ms = 0.0; // server_time - client_time
    double rtt_ms = 0.0;
    int sample_count = 0;
};

// offset = ((t1-t0)+(t2-t3))/2, rtt = (t3-t0)-(t2-t1). Exact when the two
// one-way delays are symmetric; otherwise biased by half the asymmetry.
ClockEstimate estimate_offset(const ClockSample& sample); // throws NegativeRtt

// Estimate from the minimum-RTT sample: its offset error is bounded by
// rtt/2, so the tightest sample wins over any average under jitter.
ClockEstimate best_estimate(std::span<const ClockSample> samples); // throws EmptySampleSet

inline double to_server_time(double local_ms, const ClockEstimate& estimate)
{
    return local_ms + estimate.offset_ms;
}

// Wire bodies. Timestamps ride as 8-byte big-endian IEEE-754 milliseconds.
std::vector<uint8_t> encode_ping(double t0);
std::vector<uint8_t> encode_pong(double t0, double t1, double t2);
double decode_ping(std::span<const uint8_t> body);

struct PongBody {
    double t0 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
};
PongBody decode_pong(std::span<const uint8_t> body);

// Client-session state: collects samples, steps immediately whenever a
// lower-RTT sample improves the bound.
class OffsetTracker {
public:
    void add_sample(const ClockSample& sample);
    bool has_estimate() const { return estimate_.sample_count > 0; }
    const ClockEstimate& current() const; // throws EmptySampleSet
    const std::vector<ClockSample>& samples() const { return samples_; }

private:
    std::vector<ClockSample> samples_;
    ClockEstimate estimate_;
};

} // namespace worldsync::clocksync
