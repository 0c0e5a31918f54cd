#include "doctest.h"

#include "worldsync/error.hpp"
#include "worldsync/statestore.hpp"

using namespace worldsync;

namespace {

std::vector<uint8_t> blob(std::initializer_list<uint8_t> bytes) { return bytes; }

} // namespace

TEST_SUITE("statestore")
{
    TEST_CASE("cp get after put")
    {
        store::CpStore cp({ .read_latency_ms = 5, .write_latency_ms = 7 });
        const auto put = cp.put("k", blob({ 1 }));
        CHECK(put.version == 1);
        CHECK(put.charge_ms == 7);
        const auto got = cp.get("k");
        REQUIRE(got.record);
        CHECK(got.record->value == blob({ 1 }));
        CHECK(got.record->version == 1);
        CHECK(got.charge_ms == 5);
    }

    TEST_CASE("unknown key is absent")
    {
        store::CpStore cp;
        CHECK(!cp.get("nope").record);
    }

    TEST_CASE("cas succeeds only on the current version")
    {
        store::CpStore cp;
        const auto v1 = cp.put("k", blob({ 1 })).version;
        const auto ok = cp.cas("k", v1, blob({ 2 }));
        CHECK(ok.ok);
        CHECK(ok.version == 2);

        const auto stale = cp.cas("k", v1, blob({ 3 }));
        CHECK(!stale.ok);
        CHECK(stale.version == 2); // carries the current version
        CHECK(cp.get("k").record->value == blob({ 2 }));
    }

    TEST_CASE("cas with expected 0 creates the key")
    {
        store::CpStore cp;
        CHECK(cp.cas("fresh", 0, blob({ 9 })).ok);
        CHECK(cp.get("fresh").record->version == 1);
    }

    TEST_CASE("racing cas: exactly one winner per version")
    {
        // Two writers race on one key: replay every interleaving of their
        // read-then-cas schedules and count winners per version.
        for (int first_reader = 0; first_reader < 2; ++first_reader) {
            store::CpStore cp;
            cp.put("k", blob({ 0 }));
            const uint64_t seen_a = cp.get("k").record->version;
            const uint64_t seen_b = cp.get("k").record->version;
            const auto a = cp.cas("k", first_reader == 0 ? seen_a : seen_b, blob({ 'a' }));
            const auto b = cp.cas("k", first_reader == 0 ? seen_b : seen_a, blob({ 'b' }));
            CHECK(a.ok);
            CHECK(!b.ok); // the loser observes the winner's version
            CHECK(b.version == a.version);
        }
    }

    TEST_CASE("version sequence per key is gap-free and strictly increasing")
    {
        store::CpStore cp;
        uint64_t previous = 0;
        for (int i = 0; i < 50; ++i) {
            const auto put = cp.put("k", blob({ static_cast<uint8_t>(i) }));
            CHECK(put.version == previous + 1);
            previous = put.version;
        }
    }

    TEST_CASE("outage raises StoreUnavailable")
    {
        store::CpStore cp;
        cp.set_available(false);
        try {
            (void)cp.get("k");
            FAIL("expected StoreUnavailable");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::store_unavailable);
        }
        cp.set_available(true);
        CHECK(!cp.get("k").record);
    }

    TEST_CASE("ap staleness window")
    {
        double now = 0.0;
        store::StoreProfile profile;
        profile.consistency = store::Consistency::AP;
        profile.staleness_ms = 50.0;
        store::ApStore ap(profile, [&now] { return now; }, 42);

        ap.put("k", blob({ 1 })); // committed at t=0
        now = 60.0; // beyond the window: the new value is guaranteed
        for (int i = 0; i < 200; ++i) {
            const auto got = ap.get("k");
            REQUIRE(got.record);
            CHECK(got.record->value == blob({ 1 }));
        }

        store::ApStore ap2(profile, [&now] { return now; }, 42);
        now = 0.0;
        ap2.put("old", blob({ 1 }));
        now = 100.0;
        ap2.put("old", blob({ 2 })); // v2 at t=100
        now = 120.0; // inside the window: either version, never anything else
        bool saw_old = false, saw_new = false;
        for (int i = 0; i < 400; ++i) {
            const auto got = ap2.get("old");
            REQUIRE(got.record);
            if (got.record->value == blob({ 1 }))
                saw_old = true;
            else if (got.record->value == blob({ 2 }))
                saw_new = true;
            else
                FAIL("ap store served a value that was never written");
        }
        CHECK(saw_old);
        CHECK(saw_new);
    }

    TEST_CASE("write-through cache: hit is free, coherence holds")
    {
        store::CpStore cp({ .read_latency_ms = 5, .write_latency_ms = 5 });
        store::WriteThroughCache cache(cp, 8);

        cache.put("k", blob({ 1 }));
        const auto got = cache.get("k");
        REQUIRE(got.record);
        CHECK(got.charge_ms == 0.0); // hit: no store read charged
        CHECK(cache.hits() == 1);

        // Coherence at every observation point of a single-writer trace.
        for (uint8_t i = 2; i < 20; ++i) {
            cache.put("k", blob({ i }));
            const auto via_cache = cache.get("k");
            const auto via_store = cp.get("k");
            REQUIRE(via_cache.record);
            CHECK(via_cache.record->value == via_store.record->value);
            CHECK(via_cache.record->version == via_store.record->version);
        }
    }

    TEST_CASE("lru eviction: capacity 2, access a,b,c then a misses")
    {
        store::CpStore cp({ .read_latency_ms = 5, .write_latency_ms = 5 });
        store::WriteThroughCache cache(cp, 2);
        cache.put("a", blob({ 1 }));
        cache.put("b", blob({ 2 }));
        cache.put("c", blob({ 3 })); // evicts a
        const auto got = cache.get("a");
        REQUIRE(got.record);
        CHECK(got.charge_ms == 5.0); // read went to the store
        CHECK(cache.misses() == 1);
    }

    TEST_CASE("flush does not lose writes (write-through guarantee)")
    {
        store::CpStore cp;
        store::WriteThroughCache cache(cp, 4);
        cache.put("k", blob({ 42 }));
        cache.flush();
        const auto got = cache.get("k");
        REQUIRE(got.record);
        CHECK(got.record->value == blob({ 42 }));
    }

    TEST_CASE("object keys use the documented encoding")
    {
        CHECK(store::object_key(7) == "obj/7");
        CHECK(store::object_key(123456) == "obj/123456");
    }
}
