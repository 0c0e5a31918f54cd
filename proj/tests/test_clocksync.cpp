#include "doctest.h"

#include "worldsync/clocksync.hpp"
#include "worldsync/error.hpp"

#include <array>

using namespace worldsync;

TEST_SUITE("clocksync")
{
    TEST_CASE("co-located clocks give zero offset and rtt")
    {
        const auto estimate = clocksync::estimate_offset({ 5, 5, 5, 5 });
        CHECK(estimate.offset_ms == 0.0);
        CHECK(estimate.rtt_ms == 0.0);
    }

    TEST_CASE("symmetric 10 ms path, true offset +40, 2 ms processing")
    {
        // Ground truth: client sends at 100, server clock runs 40 ahead,
        // one-way delay 10 each way, server handles for 2.
        const auto estimate = clocksync::estimate_offset({ 100, 150, 152, 122 });
        CHECK(estimate.offset_ms == doctest::Approx(40.0));
        CHECK(estimate.rtt_ms == doctest::Approx(20.0));
    }

    TEST_CASE("asymmetric delays bias the estimate by half the asymmetry")
    {
        // 15 ms out, 5 ms back, true offset 0: algebraic oracle gives +5.
        const clocksync::ClockSample sample { 0, 15, 15, 20 };
        const auto estimate = clocksync::estimate_offset(sample);
        const double oracle = ((sample.t1 - sample.t0) + (sample.t2 - sample.t3)) / 2.0;
        CHECK(estimate.offset_ms == doctest::Approx(oracle));
        CHECK(estimate.offset_ms == doctest::Approx(5.0));
        CHECK(estimate.rtt_ms == doctest::Approx(20.0));
    }

    TEST_CASE("backwards timestamps are rejected")
    {
        try {
            (void)clocksync::estimate_offset({ 10, 5, 4, 2 });
            FAIL("expected NegativeRtt");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::negative_rtt);
        }
    }

    TEST_CASE("best_estimate picks the minimum-rtt sample")
    {
        // rtts 20, 4, 30; offsets differ so the winner is visible.
        const std::array<clocksync::ClockSample, 3> samples { {
            { 0, 17, 17, 20 }, // rtt 20, offset 7
            { 0, 3, 3, 4 }, // rtt 4, offset 1
            { 0, 25, 25, 30 }, // rtt 30, offset 10
        } };
        const auto best = clocksync::best_estimate(samples);
        CHECK(best.rtt_ms == doctest::Approx(4.0));
        CHECK(best.offset_ms == doctest::Approx(1.0));
        CHECK(best.sample_count == 3);
    }

    TEST_CASE("single sample wins by default")
    {
        const std::array<clocksync::ClockSample, 1> samples { { { 0, 12, 12, 14 } } };
        const auto best = clocksync::best_estimate(samples);
        CHECK(best.offset_ms == doctest::Approx(5.0));
    }

    TEST_CASE("empty sample set")
    {
        try {
            (void)clocksync::best_estimate({});
            FAIL("expected EmptySampleSet");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::empty_sample_set);
        }
    }

    TEST_CASE("to_server_time is offset addition and inverts cleanly")
    {
        clocksync::ClockEstimate estimate;
        CHECK(clocksync::to_server_time(123.0, estimate) == 123.0);
        estimate.offset_ms = 40.0;
        const double server = clocksync::to_server_time(1000.0, estimate);
        CHECK(server == 1040.0);
        CHECK(server - estimate.offset_ms == 1000.0);
    }

    TEST_CASE("ping/pong bodies round trip")
    {
        const auto ping = clocksync::encode_ping(12.5);
        CHECK(ping.size() == 9);
        CHECK(clocksync::decode_ping(ping) == 12.5);

        const auto pong = clocksync::encode_pong(12.5, 13.25, 13.75);
        CHECK(pong.size() == 25);
        const auto decoded = clocksync::decode_pong(pong);
        CHECK(decoded.t0 == 12.5);
        CHECK(decoded.t1 == 13.25);
        CHECK(decoded.t2 == 13.75);
    }

    TEST_CASE("tracker steps only on lower rtt")
    {
        clocksync::OffsetTracker tracker;
        CHECK(!tracker.has_estimate());
        tracker.add_sample({ 0, 17, 17, 20 }); // rtt 20
        CHECK(tracker.current().rtt_ms == doctest::Approx(20.0));
        tracker.add_sample({ 0, 25, 25, 30 }); // rtt 30, worse
        CHECK(tracker.current().rtt_ms == doctest::Approx(20.0));
        tracker.add_sample({ 0, 3, 3, 4 }); // rtt 4, better
        CHECK(tracker.current().rtt_ms == doctest::Approx(4.0));
        CHECK(tracker.current().sample_count == 3);
    }
}
