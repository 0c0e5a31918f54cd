#include "doctest.h"

#include "worldsync/error.hpp"
#include "worldsync/nodes.hpp"

using namespace worldsync;

namespace {

const schema::Schema kContract = schema::parse_schema(
    "version 1\n"
    "class Avatar id=1\n"
    "  prop appearance id=1 kind=text replicated\n"
    "  prop position id=2 kind=vec3 replicated\n"
    "  prop score id=3 kind=int64 replicated\n"
    "end\n"
    "rpc SetAppearance id=10 params=(int64,text) returns=none mode=unary\n"
    "rpc Notify id=11 params=(text) returns=none mode=unary\n"
    "rpc SubscribeTelemetry id=14 params=(int64) returns=vec3 mode=stream\n");

struct World {
    sim::Sim sim;
    net::Network network;
    nodes::MetricsHub hub;
    std::unique_ptr<nodes::GameServer> server;
    std::vector<std::unique_ptr<nodes::GameClient>> clients;
    uint64_t set_appearance_calls = 0;

    explicit World(uint64_t seed, net::NetConditions conditions = { .one_way_latency_ms = 5.0 },
        double rto = 15.0)
        : network(sim, seed)
    {
        network.set_default_conditions(conditions);
        nodes::GameServer::Config config;
        config.address = { 1, 7777 };
        config.channel = { rto, 20, 1200 };
        config.tick_interval_ms = 20.0;
        server = std::make_unique<nodes::GameServer>(sim, network, hub, kContract, config);
        server->on_client_joined = [this](nodes::ClientId id) {
            if (!server->world().state().objects.count(id))
                server->world().create_object(1, id, id);
        };
        server->dispatcher().register_handler(10,
            [this](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
                ++set_appearance_calls;
                const auto id = static_cast<uint32_t>(std::get<int64_t>(args[0]));
                server->world().set_property(id, 1, args[1]);
                return rpc::Outcome::ok();
            });
        server->start();
    }

    nodes::GameClient& add_client(int index, bool clock_sync = false, double clock_offset = 0.0)
    {
        nodes::GameClient::Config config;
        config.address = { 100 + static_cast<uint32_t>(index), 5000 };
        config.server = { 1, 7777 };
        config.channel = { 15.0, 20, 1200 };
        config.proposed_id = static_cast<nodes::ClientId>(index + 1);
        config.clock_sync = clock_sync;
        config.clock_offset_ms = clock_offset;
        config.clock_ping_interval_ms = 100.0;
        clients.push_back(std::make_unique<nodes::GameClient>(sim, network, hub, kContract, config));
        clients.back()->start();
        return *clients.back();
    }
};

} // namespace

TEST_SUITE("nodes")
{
    TEST_CASE("join handshake delivers an id and a snapshot")
    {
        World world(1);
        auto& client = world.add_client(0);
        world.sim.run_until(500.0);
        CHECK(client.joined());
        CHECK(client.id() == 1);
        CHECK(client.snapshots_applied() == 1);
        CHECK(client.replica().objects().count(1)); // own avatar came with the snapshot
    }

    TEST_CASE("rpc mutation converges to the replicas through the next tick")
    {
        World world(2);
        auto& a = world.add_client(0);
        auto& b = world.add_client(1);
        world.sim.run_until(200.0);

        bool ok = false;
        a.invoke(10, { PropertyValue { int64_t { 1 } }, PropertyValue { std::string("Luigi") } }, true,
            [&ok](const nodes::GameClient::Completion& completion) {
                ok = !completion.timed_out && completion.result.status == rpc::Status::Ok;
            });
        world.sim.run_until(1000.0);
        CHECK(ok);
        CHECK(world.server->world().state().objects.at(1).properties.at(1)
            == PropertyValue { std::string("Luigi") });
        // Both replicas converge on the replicated property.
        CHECK(a.replica().objects().at(1).properties.at(1) == PropertyValue { std::string("Luigi") });
        CHECK(b.replica().objects().at(1).properties.at(1) == PropertyValue { std::string("Luigi") });
    }

    TEST_CASE("reliable rpcs execute exactly once under loss")
    {
        for (const double loss : { 0.1, 0.3, 0.5 }) {
            for (uint64_t seed = 1; seed <= 4; ++seed) {
                World world(seed, { .one_way_latency_ms = 5.0, .loss_rate = loss });
                auto& client = world.add_client(0);
                world.sim.run_until(2000.0);
                REQUIRE(client.joined());

                const int calls = 25;
                int completions = 0;
                for (int i = 0; i < calls; ++i)
                    client.invoke(10,
                        { PropertyValue { int64_t { 1 } }, PropertyValue { "v" + std::to_string(i) } }, true,
                        [&completions](const nodes::GameClient::Completion& completion) {
                            if (!completion.timed_out)
                                ++completions;
                        });
                world.sim.run_until(60000.0);
                CHECK(world.set_appearance_calls == static_cast<uint64_t>(calls));
                CHECK(completions == calls);
            }
        }
    }

    TEST_CASE("unregistered method yields NOT_IMPLEMENTED")
    {
        World world(3);
        auto& client = world.add_client(0);
        world.sim.run_until(200.0);
        rpc::RpcResult seen;
        client.invoke(11, { PropertyValue { std::string("x") } }, true,
            [&seen](const nodes::GameClient::Completion& completion) { seen = completion.result; });
        world.sim.run_until(1000.0);
        CHECK(seen.status == rpc::Status::AppError);
        CHECK(seen.app_code == rpc::kAppErrorNotImplemented);
    }

    TEST_CASE("kind mismatch is rejected before transmission")
    {
        World world(4);
        auto& client = world.add_client(0);
        world.sim.run_until(200.0);
        try {
            client.invoke(10, { PropertyValue { std::string("wrong") }, PropertyValue { int64_t { 1 } } }, true,
                {});
            FAIL("expected KindMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::kind_mismatch);
        }
    }

    TEST_CASE("multicast reaches every joined client exactly once, late joiners get nothing")
    {
        World world(5);
        auto& a = world.add_client(0);
        auto& b = world.add_client(1);
        std::map<nodes::GameClient*, int> seen;
        for (auto* client : { &a, &b })
            client->dispatcher().register_handler(11,
                [&seen, client](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
                    ++seen[client];
                    return rpc::Outcome::ok();
                });
        world.sim.run_until(200.0);

        rpc::RpcCall call;
        call.method_id = 11;
        call.target = rpc::Target::Multicast;
        call.args = { PropertyValue { std::string("hello") } };
        world.server->invoke(call);
        world.sim.run_until(400.0);

        CHECK(seen[&a] == 1);
        CHECK(seen[&b] == 1);

        // A third client joins after the multicast: nothing retroactive.
        auto& c = world.add_client(2);
        int late_seen = 0;
        c.dispatcher().register_handler(11,
            [&late_seen](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
                ++late_seen;
                return rpc::Outcome::ok();
            });
        world.sim.run_until(1000.0);
        CHECK(late_seen == 0);
    }

    TEST_CASE("server-to-client call routes and returns; absent target is unroutable")
    {
        World world(6);
        auto& a = world.add_client(0);
        a.dispatcher().register_handler(11, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
            return rpc::Outcome::ok();
        });
        world.sim.run_until(200.0);

        rpc::RpcResult to_client, to_ghost;
        rpc::RpcCall call;
        call.method_id = 11;
        call.target = rpc::Target::Client;
        call.target_client = 1;
        call.args = { PropertyValue { std::string("ping") } };
        world.server->invoke(call, [&to_client](const rpc::RpcResult& r) { to_client = r; });

        call.target_client = 99;
        world.server->invoke(call, [&to_ghost](const rpc::RpcResult& r) { to_ghost = r; });

        world.sim.run_until(500.0);
        CHECK(to_client.status == rpc::Status::Ok);
        CHECK(to_ghost.status == rpc::Status::Unroutable);
    }

    TEST_CASE("client-to-client call is relayed by the server and answered")
    {
        World world(7);
        auto& a = world.add_client(0);
        auto& b = world.add_client(1);
        int b_called = 0;
        b.dispatcher().register_handler(11,
            [&b_called](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
                ++b_called;
                return rpc::Outcome::ok();
            });
        world.sim.run_until(200.0);

        rpc::RpcResult relayed, ghost;
        a.invoke_on_client(11, b.id(), { PropertyValue { std::string("relay") } },
            [&relayed](const nodes::GameClient::Completion& completion) { relayed = completion.result; });
        a.invoke_on_client(11, 99, { PropertyValue { std::string("nobody") } },
            [&ghost](const nodes::GameClient::Completion& completion) { ghost = completion.result; });
        world.sim.run_until(800.0);

        CHECK(b_called == 1);
        CHECK(relayed.status == rpc::Status::Ok);
        CHECK(ghost.status == rpc::Status::Unroutable);
    }

    TEST_CASE("stream: open, push v1..v3, close arrives in order with clean end")
    {
        World world(9);
        world.server->set_stream_open_handler(14,
            [](nodes::ClientId, const std::vector<PropertyValue>&, uint64_t) { return uint16_t { 0 }; });
        auto& client = world.add_client(0);
        world.sim.run_until(200.0);

        std::vector<PropertyValue> values;
        bool ended = false;
        const auto stream_id = client.open_stream(14, { PropertyValue { int64_t { 1 } } },
            [&values](uint32_t, const PropertyValue& v) { values.push_back(v); },
            [&ended]() { ended = true; });
        world.sim.run_until(300.0);

        world.server->push_stream(stream_id, PropertyValue { Vec3 { 1, 0, 0 } });
        world.server->push_stream(stream_id, PropertyValue { Vec3 { 2, 0, 0 } });
        world.server->push_stream(stream_id, PropertyValue { Vec3 { 3, 0, 0 } });
        world.server->close_stream(stream_id);
        world.sim.run_until(600.0);

        REQUIRE(values.size() == 3);
        CHECK(values[0] == PropertyValue { Vec3 { 1, 0, 0 } });
        CHECK(values[2] == PropertyValue { Vec3 { 3, 0, 0 } });
        CHECK(ended);

        // Push after close is a server-side error.
        try {
            world.server->push_stream(stream_id, PropertyValue { Vec3 {} });
            FAIL("expected StreamClosed");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::stream_closed);
        }
    }

    TEST_CASE("stream: open then immediate close gives an empty stream with a clean end")
    {
        World world(10);
        world.server->set_stream_open_handler(14,
            [](nodes::ClientId, const std::vector<PropertyValue>&, uint64_t) { return uint16_t { 0 }; });
        auto& client = world.add_client(0);
        world.sim.run_until(200.0);

        int values = 0;
        bool ended = false;
        const auto stream_id = client.open_stream(14, { PropertyValue { int64_t { 1 } } },
            [&values](uint32_t, const PropertyValue&) { ++values; }, [&ended]() { ended = true; });
        world.sim.run_until(300.0);
        world.server->close_stream(stream_id);
        world.sim.run_until(500.0);
        CHECK(values == 0);
        CHECK(ended);
    }

    TEST_CASE("stream: 100 pushes under 20 percent loss arrive complete and ordered")
    {
        World world(11, { .one_way_latency_ms = 5.0, .loss_rate = 0.2 });
        world.server->set_stream_open_handler(14,
            [](nodes::ClientId, const std::vector<PropertyValue>&, uint64_t) { return uint16_t { 0 }; });
        auto& client = world.add_client(0);
        world.sim.run_until(1000.0);

        std::vector<double> received;
        bool ended = false;
        const auto stream_id = client.open_stream(14, { PropertyValue { int64_t { 1 } } },
            [&received](uint32_t, const PropertyValue& v) { received.push_back(std::get<Vec3>(v).x); },
            [&ended]() { ended = true; });
        world.sim.run_until(2000.0);
        for (int i = 0; i < 100; ++i)
            world.server->push_stream(stream_id, PropertyValue { Vec3 { static_cast<double>(i), 0, 0 } });
        world.server->close_stream(stream_id);
        world.sim.run_until(60000.0);

        REQUIRE(received.size() == 100);
        for (int i = 0; i < 100; ++i)
            CHECK(received[i] == static_cast<double>(i));
        CHECK(ended);
    }

    TEST_CASE("opening a stream on a unary method is rejected")
    {
        World world(12);
        auto& client = world.add_client(0);
        world.sim.run_until(200.0);
        try {
            (void)client.open_stream(10, { PropertyValue { int64_t { 1 } }, PropertyValue { std::string("x") } },
                {}, {});
            FAIL("expected NotAStreamMethod");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::not_a_stream_method);
        }
    }

    TEST_CASE("clock sync: zero jitter symmetric recovers the configured offset exactly")
    {
        World world(13, { .one_way_latency_ms = 10.0 });
        auto& client = world.add_client(0, true, -40.0); // client clock runs 40 behind
        world.sim.run_until(2000.0);
        REQUIRE(client.clock_tracker().has_estimate());
        const auto& estimate = client.clock_tracker().current();
        // server - client = +40, exactly, under symmetric zero-jitter paths.
        CHECK(estimate.offset_ms == 40.0);
        CHECK(estimate.rtt_ms == 20.0);
    }

    TEST_CASE("clock sync under jitter: error bounded by half the selected rtt")
    {
        for (uint64_t seed = 1; seed <= 10; ++seed) {
            World world(seed, { .one_way_latency_ms = 10.0, .jitter_ms = 5.0 });
            auto& client = world.add_client(0, true, -40.0);
            world.sim.run_until(5000.0);
            REQUIRE(client.clock_tracker().has_estimate());
            const auto& estimate = client.clock_tracker().current();
            CHECK(std::abs(estimate.offset_ms - 40.0) <= estimate.rtt_ms / 2.0 + 1e-9);
        }
    }

    TEST_CASE("late joiner sees the current state, not history")
    {
        World world(14);
        auto& a = world.add_client(0);
        world.sim.run_until(200.0);
        a.invoke(10, { PropertyValue { int64_t { 1 } }, PropertyValue { std::string("Luigi") } }, true, {});
        world.sim.run_until(400.0);

        auto& late = world.add_client(5); // joins now
        world.sim.run_until(800.0);
        REQUIRE(late.joined());
        CHECK(late.replica().objects().at(1).properties.at(1) == PropertyValue { std::string("Luigi") });
    }
}
