#include "worldsync/clocksync.hpp"

#include "worldsync/error.hpp"

namespace worldsync::clocksync {

ClockEstimate estimate_offset(const ClockSample& sample)
{
    if (sample.t3 < sample.t0 || sample.t2 < sample.t1)
        raise(Errc::negative_rtt, "sample timestamps run backwards");
    ClockEstimate estimate;
    estimate.offset_ms = ((sample.t1 - sample.t0) + (sample.t2 - sample.t3)) / 2.0;
    estimate.rtt_ms = (sample.t3 - sample.t0) - (sample.t2 - sample.t1);
    estimate.sample_count = 1;
    if (estimate.rtt_ms < 0.0)
        raise(Errc::negative_rtt, "negative round-trip time");
    return estimate;
}

ClockEstimate best_estimate(std::span<const ClockSample> samples)
{
    if (samples.empty())
        raise(Errc::empty_sample_set, "no clock samples");
    ClockEstimate best;
    bool have = false;
    for (const auto& sample : samples) {
        ClockEstimate estimate = estimate_offset(sample);
        if (!have || estimate.rtt_ms < best.rtt_ms) {
            best = estimate;
            have = true;
        }
    }
    best.sample_count = static_cast<int>(samples.size());
    return best;
}

std::vector<uint8_t> encode_ping(double t0)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::ClockPing));
    out.f64(t0);
    return out.take();
}

std::vector<uint8_t> encode_pong(double t0, double t1, double t2)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::ClockPong));
    out.f64(t0);
    out.f64(t1);
    out.f64(t2);
    return out.take();
}

double decode_ping(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::ClockPing))
        raise(Errc::unknown_body_type, "not a clock ping");
    return in.f64();
}

PongBody decode_pong(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::ClockPong))
        raise(Errc::unknown_body_type, "not a clock pong");
    PongBody pong;
    pong.t0 = in.f64();
    pong.t1 = in.f64();
    pong.t2 = in.f64();
    return pong;
}

void OffsetTracker::add_sample(const ClockSample& sample)
{
    samples_.push_back(sample);
    const ClockEstimate estimate = estimate_offset(sample);
    if (estimate_.sample_count == 0 || estimate.rtt_ms < estimate_.rtt_ms) {
        const int count = estimate_.sample_count;
        estimate_ = estimate;
        estimate_.sample_count = count;
    }
    ++estimate_.sample_count;
}

const ClockEstimate& OffsetTracker::current() const
{
    if (estimate_.sample_count == 0)
        raise(Errc::empty_sample_set, "no clock samples yet");
    return estimate_;
}

} // namespace worldsync::clocksync
