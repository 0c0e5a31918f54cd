#include "worldsync/harness.hpp"

#include "worldsync/broker.hpp"
#include "worldsync/cluster.hpp"
#include "worldsync/error.hpp"
#include "worldsync/nodes.hpp"
#include "worldsync/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <memory>

namespace worldsync::harness {

using nlohmann::ordered_json;

namespace {

    // Everything the built-in client scripts need from the contract. The
    // scripts target a class named Avatar with appearance/position/score
    // properties; scenarios whose scripts need them must declare them.
    struct ContractBindings {
        const schema::ClassDef* avatar = nullptr;
        uint16_t prop_appearance = 0;
        uint16_t prop_position = 0;
        uint16_t prop_score = 0;
        uint16_t set_appearance = 0;
        uint16_t move_to = 0;
        uint16_t adjust_score = 0;
        uint16_t get_appearance = 0;
        uint16_t subscribe_telemetry = 0;
        bool has_methods = false;
    };

    uint16_t method_id_of(const schema::Schema& contract, const char* name)
    {
        for (const auto& method : contract.methods)
            if (method.name == name)
                return method.method_id;
        return 0;
    }

    ContractBindings bind_contract(const schema::Schema& contract, bool required)
    {
        ContractBindings bind;
        bind.avatar = schema::lookup_class(contract, "Avatar");
        if (bind.avatar) {
            for (const auto& prop : bind.avatar->properties) {
                if (prop.key == "appearance")
                    bind.prop_appearance = prop.prop_id;
                else if (prop.key == "position")
                    bind.prop_position = prop.prop_id;
                else if (prop.key == "score")
                    bind.prop_score = prop.prop_id;
            }
        }
        bind.set_appearance = method_id_of(contract, "SetAppearance");
        bind.move_to = method_id_of(contract, "MoveTo");
        bind.adjust_score = method_id_of(contract, "AdjustScore");
        bind.get_appearance = method_id_of(contract, "GetAppearance");
        bind.subscribe_telemetry = method_id_of(contract, "SubscribeTelemetry");
        bind.has_methods = bind.set_appearance && bind.move_to && bind.adjust_score;
        if (required && (!bind.avatar || !bind.has_methods))
            raise(Errc::invalid_scenario,
                "the built-in scripts need an Avatar class and SetAppearance/MoveTo/AdjustScore methods");
        return bind;
    }

    struct Op {
        uint16_t method_id = 0;
        std::vector<PropertyValue> args;
    };

    // The client op log: a pure function of (seed, client index), so every
    // topology consuming it sees the same logical events.
    std::vector<Op> make_ops(const Scenario& scenario, const ContractBindings& bind, int client_index)
    {
        std::vector<Op> ops;
        const std::string& kind = scenario.script.op;
        if (kind == "none" || kind == "telemetry")
            return ops;

        DetRng rng(mix_seed(scenario.seed, 7700 + static_cast<uint64_t>(client_index)));
        const int64_t own = client_index + 1;
        const std::string tag = "c" + std::to_string(own);

        for (int k = 0; k < scenario.script.ops_per_client; ++k) {
            Op op;
            const bool adjust = (kind == "adjust_score" && k > 0) || (kind == "mixed" && k % 2 == 1);
            if (kind == "move") {
                op.method_id = bind.move_to;
                op.args = { PropertyValue { own },
                    PropertyValue { Vec3 { rng.range(-50, 50), rng.range(-50, 50), rng.range(-50, 50) } } };
            } else if (adjust) {
                op.method_id = bind.adjust_score;
                const int64_t target = static_cast<int64_t>(rng.below(scenario.clients)) + 1;
                op.args = { PropertyValue { target }, PropertyValue { rng.int_range(1, 9) } };
            } else {
                op.method_id = bind.set_appearance;
                op.args = { PropertyValue { own }, PropertyValue { tag + "-" + std::to_string(k) } };
            }
            ops.push_back(std::move(op));
        }
        return ops;
    }

    // Drives one client through its op log: closed loop (next op after the
    // previous completes, with bounded retry on timeout) or open loop
    // (paced sends for capacity probing).
    class ClientScript {
    public:
        ClientScript(sim::Sim& sim, nodes::MetricsHub& hub, nodes::GameClient& client, const Scenario& scenario,
            std::vector<Op> ops, std::string event_class)
            : sim_(sim)
            , hub_(hub)
            , client_(client)
            , scenario_(scenario)
            , ops_(std::move(ops))
            , event_class_(std::move(event_class))
        {
        }

        void begin()
        {
            if (begun_)
                return; // re-join snapshots must not restart the script
            begun_ = true;
            if (ops_.empty()) {
                finished_sending_ = true;
                return;
            }
            if (scenario_.script.closed_loop) {
                send_closed(0, 0);
            } else {
                const double period = scenario_.script.period_ms;
                const double horizon = scenario_.duration_ms * 0.8;
                double at = sim_.now_ms() + 10.0;
                for (size_t i = 0; i < ops_.size() && at <= horizon; ++i, at += period) {
                    sim_.schedule(at, [this, i]() { send_open(i); });
                    ++planned_;
                }
                finished_sending_ = planned_ == 0;
            }
        }

        bool done() const
        {
            if (scenario_.script.closed_loop)
                return next_op_ >= ops_.size();
            return finished_sending_;
        }

        uint64_t sent() const { return sent_; }
        uint64_t completed() const { return completed_; }

    private:
        void send_closed(size_t index, int attempt)
        {
            if (index >= ops_.size())
                return;
            const Op& op = ops_[index];
            ++sent_;
            client_.invoke(op.method_id, op.args, true,
                [this, index, attempt](const nodes::GameClient::Completion& completion) {
                    if (completion.timed_out) {
                        if (attempt < scenario_.script.retry_limit) {
                            hub_.count_retry();
                            send_closed(index, attempt + 1);
                        } else {
                            hub_.count_failure();
                            next_op_ = index + 1;
                            send_closed(index + 1, 0);
                        }
                        return;
                    }
                    ++completed_;
                    next_op_ = index + 1;
                    send_closed(index + 1, 0);
                },
                event_class_);
        }

        void send_open(size_t index)
        {
            const Op& op = ops_[index];
            ++sent_;
            client_.invoke(op.method_id, op.args, true,
                [this](const nodes::GameClient::Completion& completion) {
                    if (!completion.timed_out)
                        ++completed_;
                },
                event_class_);
            if (sent_ == planned_)
                finished_sending_ = true;
        }

        sim::Sim& sim_;
        nodes::MetricsHub& hub_;
        nodes::GameClient& client_;
        const Scenario& scenario_;
        std::vector<Op> ops_;
        std::string event_class_;
        size_t next_op_ = 0;
        uint64_t sent_ = 0;
        uint64_t completed_ = 0;
        uint64_t planned_ = 0;
        bool begun_ = false;
        bool finished_sending_ = false;
    };

    repl::ReplicatedObject default_avatar(const ContractBindings& bind, uint32_t object_id)
    {
        repl::ReplicatedObject object;
        object.object_id = object_id;
        object.class_id = bind.avatar->class_id;
        for (const auto& prop : bind.avatar->properties)
            object.properties[prop.prop_id] = default_value(prop.kind);
        return object;
    }

    void ensure_world_object(repl::ServerWorld& world, const ContractBindings& bind, uint32_t object_id)
    {
        if (!world.state().objects.count(object_id))
            world.create_object(bind.avatar->class_id, std::nullopt, object_id);
    }

    // Stateful tier: handlers mutate the authoritative world; replication
    // carries the change out.
    void install_world_handlers(nodes::GameServer& server, const ContractBindings& bind)
    {
        auto& world = server.world();
        server.dispatcher().register_handler(bind.set_appearance,
            [&world, bind](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
                const auto id = static_cast<uint32_t>(std::get<int64_t>(args[0]));
                ensure_world_object(world, bind, id);
                world.set_property(id, bind.prop_appearance, args[1]);
                return rpc::Outcome::ok();
            });
        server.dispatcher().register_handler(bind.move_to,
            [&world, bind](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
                const auto id = static_cast<uint32_t>(std::get<int64_t>(args[0]));
                ensure_world_object(world, bind, id);
                world.set_property(id, bind.prop_position, args[1]);
                return rpc::Outcome::ok();
            });
        server.dispatcher().register_handler(bind.adjust_score,
            [&world, bind](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
                const auto id = static_cast<uint32_t>(std::get<int64_t>(args[0]));
                ensure_world_object(world, bind, id);
                const auto& current = world.state().objects.at(id).properties.at(bind.prop_score);
                const int64_t next = std::get<int64_t>(current) + std::get<int64_t>(args[1]);
                world.set_property(id, bind.prop_score, next);
                return rpc::Outcome::ok(PropertyValue { next });
            });
        if (bind.get_appearance)
            server.dispatcher().register_handler(bind.get_appearance,
                [&world, bind](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
                    const auto id = static_cast<uint32_t>(std::get<int64_t>(args[0]));
                    const auto it = world.state().objects.find(id);
                    PropertyValue value = it == world.state().objects.end()
                        ? default_value(ValueKind::Text)
                        : it->second.properties.at(bind.prop_appearance);
                    return rpc::Outcome::ok(std::move(value));
                });
    }

    // Stateless tier: read-modify-write against the shared store. The cas
    // retry loop re-reads on conflict; with cas disabled the write is blind
    // and concurrent updates can be lost.
    void install_store_handlers(nodes::StatelessServer& server, const ContractBindings& bind,
        const schema::Schema& contract)
    {
        constexpr int kMaxCasAttempts = 32;
        constexpr uint16_t kAppErrorContention = 9;

        auto mutate = [bind, &contract](nodes::StatelessServer& srv, nodes::StatelessServer::RequestPtr req,
                          auto mutate_fn, auto result_fn) {
            const auto id = static_cast<uint32_t>(std::get<int64_t>(req->call.args[0]));
            const std::string key = store::object_key(id);
            auto attempt = std::make_shared<std::function<void()>>();
            *attempt = [&srv, req, key, id, bind, &contract, mutate_fn, result_fn, attempt]() {
                srv.read_record(req, key, [&srv, req, key, id, bind, &contract, mutate_fn, result_fn, attempt](
                                              std::optional<store::Record> record) {
                    repl::ReplicatedObject object = record
                        ? repl::decode_object(record->value)
                        : default_avatar(bind, id);
                    mutate_fn(object);
                    auto encoded = repl::encode_object(object, contract);
                    const uint64_t expected = record ? record->version : 0;
                    srv.write_record(req, key, expected, std::move(encoded),
                        [&srv, req, object, result_fn, attempt](store::CasResult cas) {
                            if (cas.ok) {
                                srv.respond(req,
                                    rpc::RpcResult { req->call.call_id, rpc::Status::Ok, 0, result_fn(object) });
                                return;
                            }
                            if (++req->attempts >= kMaxCasAttempts) {
                                srv.respond(req,
                                    rpc::RpcResult {
                                        req->call.call_id, rpc::Status::AppError, kAppErrorContention, {} });
                                return;
                            }
                            (*attempt)();
                        });
                });
            };
            (*attempt)();
        };

        server.register_handler(bind.set_appearance,
            [bind, mutate](nodes::StatelessServer& srv, nodes::StatelessServer::RequestPtr req) {
                const PropertyValue value = req->call.args[1];
                mutate(
                    srv, req,
                    [bind, value](repl::ReplicatedObject& object) { object.properties[bind.prop_appearance] = value; },
                    [](const repl::ReplicatedObject&) { return std::optional<PropertyValue> {}; });
            });
        server.register_handler(bind.move_to,
            [bind, mutate](nodes::StatelessServer& srv, nodes::StatelessServer::RequestPtr req) {
                const PropertyValue value = req->call.args[1];
                mutate(
                    srv, req,
                    [bind, value](repl::ReplicatedObject& object) { object.properties[bind.prop_position] = value; },
                    [](const repl::ReplicatedObject&) { return std::optional<PropertyValue> {}; });
            });
        server.register_handler(bind.adjust_score,
            [bind, mutate](nodes::StatelessServer& srv, nodes::StatelessServer::RequestPtr req) {
                const int64_t delta = std::get<int64_t>(req->call.args[1]);
                mutate(
                    srv, req,
                    [bind, delta](repl::ReplicatedObject& object) {
                        auto& slot = object.properties[bind.prop_score];
                        slot = std::get<int64_t>(slot) + delta;
                    },
                    [bind](const repl::ReplicatedObject& object) {
                        return std::optional<PropertyValue> { object.properties.at(bind.prop_score) };
                    });
            });
        if (bind.get_appearance)
            server.register_handler(bind.get_appearance,
                [bind](nodes::StatelessServer& srv, nodes::StatelessServer::RequestPtr req) {
                    const auto id = static_cast<uint32_t>(std::get<int64_t>(req->call.args[0]));
                    srv.read_record(req, store::object_key(id),
                        [&srv, req, bind](std::optional<store::Record> record) {
                            PropertyValue value = default_value(ValueKind::Text);
                            if (record) {
                                const auto object = repl::decode_object(record->value);
                                if (const auto it = object.properties.find(bind.prop_appearance);
                                    it != object.properties.end())
                                    value = it->second;
                            }
                            srv.respond(req,
                                rpc::RpcResult { req->call.call_id, rpc::Status::Ok, 0, std::move(value) });
                        });
                });
    }

    bool stateful_family(Topology topology)
    {
        return topology == Topology::Direct || topology == Topology::StatefulDedicated
            || topology == Topology::BrokeredIngestion || topology == Topology::Hybrid;
    }

    struct Runner {
        Scenario scenario;
        sim::Sim sim;
        net::Network network;
        nodes::MetricsHub hub;
        ContractBindings bind;
        cluster::BackendPool pool;
        std::unique_ptr<store::StateStore> shared_store;
        std::unique_ptr<store::WriteThroughCache> shared_cache;
        std::vector<std::unique_ptr<nodes::GameServer>> game_servers;
        std::vector<std::unique_ptr<nodes::StatelessServer>> rpc_servers;
        std::vector<std::unique_ptr<nodes::GameClient>> clients;
        std::vector<std::unique_ptr<nodes::GameClient>> tier_clients;
        std::vector<std::unique_ptr<nodes::GameClient>> workers;
        std::vector<std::unique_ptr<ClientScript>> scripts;
        broker::Broker mq;
        std::map<uint64_t, std::pair<size_t, uint32_t>> stream_targets; // stream -> (server, object)
        uint64_t streams_closed = 0;

        explicit Runner(Scenario s)
            : scenario(std::move(s))
            , network(sim, scenario.seed)
            , pool(scenario.pool_policy == "flow_hash" ? cluster::Policy::FlowHash : cluster::Policy::RoundRobin,
                  scenario.affinity_expiry_ms)
        {
        }

        net::Address server_address(int i) const { return { 1 + static_cast<uint32_t>(i), 7777 }; }
        net::Address client_address(int i) const { return { 100 + static_cast<uint32_t>(i), 5000 }; }
        net::Address tier_client_address(int i) const { return { 100 + static_cast<uint32_t>(i), 5001 }; }
        net::Address worker_address(int i) const { return { 200 + static_cast<uint32_t>(i), 5000 }; }

        net::ChannelConfig channel_config() const
        {
            return net::ChannelConfig { scenario.effective_rto_ms(), 20, scenario.mtu };
        }

        repl::RelevanceRule relevance_rule() const
        {
            return scenario.relevance == "radius" ? repl::RelevanceRule::within(scenario.relevance_radius)
                                                  : repl::RelevanceRule::all();
        }

        void build()
        {
            bind = bind_contract(scenario.contract, scenario.script.op != "none");
            network.set_default_conditions(scenario.conditions);
            for (int i = 0; i < scenario.servers; ++i)
                pool.add_backend(static_cast<cluster::BackendId>(i));

            const bool stateful = stateful_family(scenario.topology);
            const bool stateless = scenario.topology == Topology::StatelessRpc
                || scenario.topology == Topology::Hybrid;

            if (stateful)
                build_stateful_tier();
            if (stateless)
                build_stateless_tier();
            build_clients(stateful, stateless);
            if (scenario.topology == Topology::BrokeredIngestion || scenario.topology == Topology::Hybrid)
                build_broker_path();
            schedule_faults(stateful);
        }

        void build_stateful_tier()
        {
            const int count = scenario.topology == Topology::Direct ? 1 : scenario.servers;
            for (int i = 0; i < count; ++i) {
                nodes::GameServer::Config config;
                config.address = server_address(i);
                config.channel = channel_config();
                config.tick_interval_ms = scenario.tick_interval_ms;
                config.service_time_ms = scenario.service_time_ms;
                config.relevance = relevance_rule();
                config.reliable_deltas = scenario.reliable_deltas;
                auto server = std::make_unique<nodes::GameServer>(sim, network, hub, scenario.contract, config);
                if (bind.has_methods)
                    install_world_handlers(*server, bind);
                auto* raw = server.get();
                if (bind.avatar) {
                    server->on_client_joined = [raw, this](nodes::ClientId id) {
                        ensure_world_object(raw->world(), bind, id);
                    };
                    server->viewpoint_provider = [raw, this](nodes::ClientId id) {
                        const auto it = raw->world().state().objects.find(id);
                        if (it == raw->world().state().objects.end())
                            return Vec3 {};
                        const auto prop = it->second.properties.find(bind.prop_position);
                        if (prop == it->second.properties.end() || kind_of(prop->second) != ValueKind::Vec3)
                            return Vec3 {};
                        return std::get<Vec3>(prop->second);
                    };
                }
                if (scenario.script.op == "telemetry" && bind.subscribe_telemetry) {
                    const size_t index = game_servers.size();
                    server->set_stream_open_handler(bind.subscribe_telemetry,
                        [this, index](nodes::ClientId, const std::vector<PropertyValue>& args, uint64_t stream_id) {
                            stream_targets[stream_id] = { index,
                                static_cast<uint32_t>(std::get<int64_t>(args[0])) };
                            return static_cast<uint16_t>(0);
                        });
                }
                server->start();
                game_servers.push_back(std::move(server));
            }
            if (scenario.script.op == "telemetry" && bind.subscribe_telemetry)
                schedule_stream_pump();
        }

        void build_stateless_tier()
        {
            store::StoreProfile profile = scenario.store_profile;
            if (profile.consistency == store::Consistency::AP)
                shared_store = std::make_unique<store::ApStore>(profile, [this] { return sim.now_ms(); },
                    mix_seed(scenario.seed, 0xA9));
            else
                shared_store = std::make_unique<store::CpStore>(profile);
            if (scenario.use_cache)
                shared_cache = std::make_unique<store::WriteThroughCache>(*shared_store, scenario.cache_capacity);

            for (int i = 0; i < scenario.servers; ++i) {
                nodes::StatelessServer::Config config;
                config.address = scenario.topology == Topology::Hybrid
                    ? net::Address { 50 + static_cast<uint32_t>(i), 8080 }
                    : server_address(i);
                config.channel = channel_config();
                config.service_time_ms = scenario.service_time_ms;
                config.cas_enabled = scenario.cas_enabled;
                auto server = std::make_unique<nodes::StatelessServer>(sim, network, hub, scenario.contract,
                    *shared_store, shared_cache.get(), config);
                install_store_handlers(*server, bind, scenario.contract);
                server->start();
                rpc_servers.push_back(std::move(server));
            }
        }

        net::Address stateless_address(int i) const
        {
            return scenario.topology == Topology::Hybrid ? net::Address { 50 + static_cast<uint32_t>(i), 8080 }
                                                         : server_address(i);
        }

        // Request-level routing: the balancer is a routing function invoked
        // from the simulation, per the stateless (HTTP-style) tier model.
        net::Address route_stateless(const net::Address& from)
        {
            cluster::BackendId backend;
            if (pool.policy() == cluster::Policy::FlowHash)
                backend = pool.route(cluster::FlowKey::from(from, { 0, 80 }), sim.now_ms());
            else
                backend = pool.route_round_robin();
            return stateless_address(static_cast<int>(backend));
        }

        void build_clients(bool stateful, bool stateless)
        {
            const bool primary_stateless = scenario.topology == Topology::StatelessRpc;
            for (int i = 0; i < scenario.clients; ++i) {
                nodes::GameClient::Config config;
                config.address = client_address(i);
                config.channel = channel_config();
                config.proposed_id = static_cast<nodes::ClientId>(i + 1);
                config.timeout_ms = scenario.effective_timeout_ms();
                config.join = stateful;
                config.server = stateful ? pinned_server_address() : stateless_address(0);
                config.clock_sync = scenario.clock_sync;
                config.clock_ping_interval_ms = scenario.clock_ping_interval_ms;
                if (!scenario.clock_offsets_ms.empty())
                    config.clock_offset_ms = scenario.clock_offsets_ms[i % scenario.clock_offsets_ms.size()];

                auto client = std::make_unique<nodes::GameClient>(sim, network, hub, scenario.contract, config);
                auto* raw = client.get();
                if (primary_stateless)
                    raw->set_route_provider([this, raw] { return route_stateless(raw->address()); });

                auto script = std::make_unique<ClientScript>(sim, hub, *raw, scenario,
                    make_ops(scenario, bind, i), "rpc");
                auto* script_raw = script.get();
                const bool late = i >= scenario.clients - scenario.late_joiners;
                const double join_at = late ? scenario.late_join_at_ms : 0.0;

                if (stateful) {
                    // Scripts start once the join snapshot lands.
                    raw->on_snapshot = [script_raw]() { script_raw->begin(); };
                    if (scenario.script.op == "telemetry" && bind.subscribe_telemetry)
                        raw->on_joined = [this, raw]() { open_telemetry_stream(*raw); };
                } else {
                    sim.schedule(join_at, [script_raw]() { script_raw->begin(); });
                }
                client->start(join_at);
                clients.push_back(std::move(client));
                scripts.push_back(std::move(script));
            }
            (void)stateless;
            if (scenario.topology == Topology::Hybrid)
                build_hybrid_tier_clients();
        }

        net::Address pinned_server_address() const
        {
            // Scene pinning: every client of the scene reaches one backend.
            return server_address(0);
        }

        void build_hybrid_tier_clients()
        {
            for (int i = 0; i < scenario.clients; ++i) {
                nodes::GameClient::Config config;
                config.address = tier_client_address(i);
                config.channel = channel_config();
                config.join = false;
                config.timeout_ms = scenario.effective_timeout_ms();
                config.server = stateless_address(0);
                auto client = std::make_unique<nodes::GameClient>(sim, network, hub, scenario.contract, config);
                auto* raw = client.get();
                raw->set_route_provider([this, raw] { return route_stateless(raw->address()); });

                // The same op mix, applied against the store tier.
                auto script = std::make_unique<ClientScript>(sim, hub, *raw, scenario,
                    make_ops(scenario, bind, i), "rpc_store");
                auto* script_raw = script.get();
                sim.schedule(0.0, [script_raw]() { script_raw->begin(); });
                client->start();
                tier_clients.push_back(std::move(client));
                scripts.push_back(std::move(script));
            }
        }

        void open_telemetry_stream(nodes::GameClient& client)
        {
            const int64_t own = client.id();
            client.open_stream(bind.subscribe_telemetry, { PropertyValue { own } },
                [](uint32_t, const PropertyValue&) {}, [this]() { ++streams_closed; });
        }

        void schedule_stream_pump()
        {
            sim.schedule(scenario.tick_interval_ms, [this]() { pump_streams(); });
            sim.schedule(scenario.duration_ms * 0.8, [this]() {
                for (auto& server : game_servers)
                    for (const uint64_t id : server->open_streams())
                        server->close_stream(id);
            });
        }

        void pump_streams()
        {
            for (auto& server : game_servers) {
                for (const uint64_t id : server->open_streams()) {
                    const auto it = stream_targets.find(id);
                    if (it == stream_targets.end())
                        continue;
                    Vec3 position;
                    const auto& objects = server->world().state().objects;
                    if (const auto obj = objects.find(it->second.second); obj != objects.end()) {
                        const auto prop = obj->second.properties.find(bind.prop_position);
                        if (prop != obj->second.properties.end() && kind_of(prop->second) == ValueKind::Vec3)
                            position = std::get<Vec3>(prop->second);
                    }
                    server->push_stream(id, PropertyValue { position });
                }
            }
            if (sim.now_ms() + scenario.tick_interval_ms < scenario.duration_ms * 0.8)
                sim.schedule(sim.now_ms() + scenario.tick_interval_ms, [this]() { pump_streams(); });
        }

        void build_broker_path()
        {
            mq.create_topic("ingest", scenario.broker.partitions);
            std::vector<std::string> members;
            for (int w = 0; w < scenario.broker.workers; ++w)
                members.push_back("w" + std::to_string(w));
            mq.create_group("ingest", "ingest", members,
                scenario.broker.mode == "push" ? broker::DeliveryMode::Push : broker::DeliveryMode::Pull);

            // Sensor-backed objects live in the scene ahead of time.
            for (int s = 0; s < scenario.broker.sensors; ++s)
                ensure_world_object(game_servers[0]->world(), bind, 1000 + static_cast<uint32_t>(s));

            for (int w = 0; w < scenario.broker.workers; ++w) {
                nodes::GameClient::Config config;
                config.address = worker_address(w);
                config.channel = channel_config();
                config.join = false;
                config.timeout_ms = scenario.effective_timeout_ms();
                config.server = server_address(0);
                auto worker = std::make_unique<nodes::GameClient>(sim, network, hub, scenario.contract, config);
                worker->start();
                workers.push_back(std::move(worker));
            }

            // Sensors publish (target, t_publish, position) tuples.
            for (int s = 0; s < scenario.broker.sensors; ++s) {
                DetRng rng(mix_seed(scenario.seed, 0x5E + static_cast<uint64_t>(s)));
                for (int k = 0; k < scenario.broker.events_per_sensor; ++k) {
                    const double at = (k + 1) * scenario.broker.publish_interval_ms
                        + s * scenario.broker.publish_interval_ms / std::max(1, scenario.broker.sensors);
                    const Vec3 position { rng.range(-100, 100), rng.range(-100, 100), rng.range(-100, 100) };
                    const uint32_t target = 1000 + static_cast<uint32_t>(s);
                    sim.schedule(at, [this, s, target, position]() {
                        wire::ByteWriter payload;
                        payload.u32(target);
                        payload.f64(sim.now_ms());
                        payload.f64(position.x);
                        payload.f64(position.y);
                        payload.f64(position.z);
                        mq.publish("ingest", "sensor" + std::to_string(s), payload.take());
                    });
                }
            }

            if (scenario.broker.mode == "push") {
                for (int w = 0; w < scenario.broker.workers; ++w) {
                    mq.subscribe_push("ingest", "w" + std::to_string(w),
                        [this, w](const broker::Delivered& item) {
                            apply_ingest(w, item);
                            return true;
                        });
                }
                schedule_broker_tick();
            } else {
                schedule_worker_pulls();
            }
        }

        void schedule_broker_tick()
        {
            sim.schedule(sim.now_ms() + scenario.broker.deliver_interval_ms, [this]() {
                mq.deliver_push();
                if (sim.now_ms() < scenario.duration_ms)
                    schedule_broker_tick();
            });
        }

        void schedule_worker_pulls()
        {
            sim.schedule(sim.now_ms() + scenario.broker.deliver_interval_ms, [this]() {
                for (int w = 0; w < scenario.broker.workers; ++w) {
                    for (const auto& item : mq.pull("ingest", "w" + std::to_string(w), 16)) {
                        apply_ingest(w, item);
                        mq.commit("ingest", item.partition, item.offset);
                    }
                }
                if (sim.now_ms() < scenario.duration_ms)
                    schedule_worker_pulls();
            });
        }

        void apply_ingest(int worker_index, const broker::Delivered& item)
        {
            wire::ByteReader in(item.payload);
            const uint32_t target = in.u32();
            const double published_ms = in.f64();
            Vec3 position;
            position.x = in.f64();
            position.y = in.f64();
            position.z = in.f64();
            workers[worker_index]->invoke(bind.move_to,
                { PropertyValue { static_cast<int64_t>(target) }, PropertyValue { position } }, true,
                [this, published_ms](const nodes::GameClient::Completion& completion) {
                    if (completion.timed_out)
                        return;
                    const double total = sim.now_ms() - published_ms;
                    hub.record("ingest", { total, 0.0, 0.0, total });
                },
                "ingest_apply");
        }

        void schedule_faults(bool stateful)
        {
            for (const FaultEvent& fault : scenario.faults) {
                if (fault.type == "backend_down") {
                    sim.schedule(fault.at_ms, [this, fault, stateful]() {
                        pool.mark_down(fault.backend);
                        if (stateful) {
                            if (fault.backend < game_servers.size())
                                game_servers[fault.backend]->stop();
                            const auto up = pool.up_backends();
                            if (up.empty())
                                return;
                            const net::Address target = server_address(static_cast<int>(up.front()));
                            const net::Address dead = server_address(static_cast<int>(fault.backend));
                            for (auto& client : clients) {
                                if (client->server_address() == dead) {
                                    hub.count_disruption();
                                    client->reconnect(target);
                                }
                            }
                        } else {
                            if (fault.backend < rpc_servers.size())
                                rpc_servers[fault.backend]->stop();
                        }
                    });
                } else if (fault.type == "client_ip_change") {
                    sim.schedule(fault.at_ms, [this, fault, stateful]() {
                        const size_t index = fault.client == 0 ? 0 : fault.client - 1;
                        if (index >= clients.size())
                            return;
                        auto& client = clients[index];
                        net::Address moved = client->address();
                        moved.node += 1000;
                        if (stateful)
                            hub.count_disruption(); // session identity is lost with the flow
                        client->change_address(moved);
                    });
                }
            }
        }

        RunResult run()
        {
            build();
            sim.run_until(scenario.duration_ms);
            return finish();
        }

        std::map<repl::ObjectId, repl::ReplicatedObject> final_objects() const
        {
            std::map<repl::ObjectId, repl::ReplicatedObject> out;
            if (stateful_family(scenario.topology)) {
                if (!game_servers.empty())
                    out = game_servers[0]->world().state().objects;
            } else if (shared_store) {
                for (const auto& [key, record] : shared_store->dump()) {
                    if (key.rfind("obj/", 0) != 0)
                        continue;
                    auto object = repl::decode_object(record.value);
                    out.emplace(object.object_id, std::move(object));
                }
            }
            return out;
        }

        RunResult finish()
        {
            RunResult result;
            result.final_objects = final_objects();
            LatencyReport& report = result.report;
            report.scenario_name = scenario.name;
            report.topology = topology_name(scenario.topology);
            report.seed = scenario.seed;
            report.scenario_hash = scenario.scenario_hash;
            report.schema_version = scenario.contract.version;
            report.duration_ms = scenario.duration_ms;

            for (const auto& [event_class, events] : hub.events()) {
                ClassStats stats;
                stats.count = events.size();
                std::vector<double> totals;
                totals.reserve(events.size());
                double total = 0, network = 0, store_ms = 0, processing = 0;
                for (const auto& event : events) {
                    totals.push_back(event.total_ms);
                    total += event.total_ms;
                    network += event.network_ms;
                    store_ms += event.store_ms;
                    processing += event.processing_ms;
                }
                stats.p50 = percentile(totals, 50.0);
                stats.p90 = percentile(totals, 90.0);
                stats.p99 = percentile(totals, 99.0);
                stats.max = *std::max_element(totals.begin(), totals.end());
                stats.mean_ms = total / static_cast<double>(events.size());
                stats.mean_network_ms = network / static_cast<double>(events.size());
                stats.mean_store_ms = store_ms / static_cast<double>(events.size());
                stats.mean_processing_ms = processing / static_cast<double>(events.size());
                stats.throughput_per_s = static_cast<double>(events.size()) / (scenario.duration_ms / 1000.0);
                report.classes.emplace(event_class, stats);
            }

            report.frames_sent = network.frames_sent();
            report.frames_delivered = network.frames_delivered();
            report.frames_dropped = network.frames_dropped();
            report.frames_duplicated = network.frames_duplicated();
            report.disruptions = hub.disruptions();
            report.timeouts = hub.timeouts();
            report.retries = hub.retries();
            report.failures = hub.failures();

            uint64_t give_ups = 0;
            for (const auto& server : game_servers)
                give_ups += server->give_up_count();
            for (const auto& client : clients)
                give_ups += client->give_up_count();
            for (const auto& client : tier_clients)
                give_ups += client->give_up_count();
            for (const auto& worker : workers)
                give_ups += worker->give_up_count();
            report.give_ups = give_ups;

            for (const auto& script : scripts) {
                report.ops_sent += script->sent();
                report.ops_completed += script->completed();
                report.scripts_completed = report.scripts_completed && script->done();
            }

            for (const double fps : scenario.fps_targets) {
                const FrameBudget budget = frame_deadline(fps);
                BudgetVerdict verdict;
                verdict.fps = fps;
                verdict.period_display_ms = budget.period_display_ms;
                verdict.classification = rate_class_name(budget.classification);
                for (const char* event_class : { "rpc", "replication_delta" }) {
                    const auto it = report.classes.find(event_class);
                    if (it != report.classes.end())
                        verdict.within_budget[event_class] = it->second.p99 <= budget.period_ms;
                }
                report.budgets.push_back(std::move(verdict));
            }

            if (scenario.clock_sync) {
                ClockSummary clock;
                for (const auto& client : clients) {
                    if (!client->clock_tracker().has_estimate())
                        continue;
                    ++clock.clients;
                    const auto& estimate = client->clock_tracker().current();
                    // The server clock is the reference, so the true offset
                    // (server - client) is minus the client's own offset.
                    const double truth = 0.0 - (client->local_now_ms() - sim.now_ms());
                    const double error = estimate.offset_ms - truth;
                    clock.max_abs_error_ms = std::max(clock.max_abs_error_ms, std::abs(error));
                    clock.max_selected_rtt_ms = std::max(clock.max_selected_rtt_ms, estimate.rtt_ms);
                    clock.exact = clock.exact && error == 0.0;
                    clock.bound_satisfied = clock.bound_satisfied && std::abs(error) <= estimate.rtt_ms / 2.0;
                }
                report.clock = clock;
            }

            const auto canonical = repl::canonical_world_bytes(result.final_objects, scenario.contract);
            report.final_state_hash = fnv1a64(canonical.data(), canonical.size());
            return result;
        }
    };

    std::string hex64(uint64_t value)
    {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016" PRIx64, value);
        return buf;
    }

} // namespace

std::string LatencyReport::to_json() const
{
    ordered_json root;
    root["meta"] = {
        { "scenario", scenario_name },
        { "topology", topology },
        { "seed", seed },
        { "scenario_hash", hex64(scenario_hash) },
        { "tool_version", tool_version },
        { "schema_version", schema_version },
        { "duration_ms", duration_ms },
    };
    ordered_json class_block = ordered_json::object();
    for (const auto& [name, stats] : classes) {
        class_block[name] = {
            { "count", stats.count },
            { "p50_ms", stats.p50 },
            { "p90_ms", stats.p90 },
            { "p99_ms", stats.p99 },
            { "max_ms", stats.max },
            { "mean_ms", stats.mean_ms },
            { "mean_network_ms", stats.mean_network_ms },
            { "mean_store_ms", stats.mean_store_ms },
            { "mean_processing_ms", stats.mean_processing_ms },
            { "throughput_per_s", stats.throughput_per_s },
        };
    }
    root["event_classes"] = class_block;
    root["counters"] = {
        { "frames_sent", frames_sent },
        { "frames_delivered", frames_delivered },
        { "frames_dropped", frames_dropped },
        { "frames_duplicated", frames_duplicated },
        { "disruptions", disruptions },
        { "timeouts", timeouts },
        { "retries", retries },
        { "failures", failures },
        { "give_ups", give_ups },
        { "ops_sent", ops_sent },
        { "ops_completed", ops_completed },
        { "scripts_completed", scripts_completed },
    };
    ordered_json budget_block = ordered_json::array();
    for (const auto& verdict : budgets) {
        ordered_json entry = {
            { "fps", verdict.fps },
            { "period_display_ms", verdict.period_display_ms },
            { "classification", verdict.classification },
        };
        ordered_json within = ordered_json::object();
        for (const auto& [event_class, ok] : verdict.within_budget)
            within[event_class] = ok;
        entry["within_budget"] = within;
        budget_block.push_back(entry);
    }
    root["frame_budgets"] = budget_block;
    if (clock) {
        root["clock_sync"] = {
            { "clients", clock->clients },
            { "max_abs_error_ms", clock->max_abs_error_ms },
            { "max_selected_rtt_ms", clock->max_selected_rtt_ms },
            { "exact", clock->exact },
            { "bound_satisfied", clock->bound_satisfied },
        };
    }
    root["final_state_hash"] = hex64(final_state_hash);
    return root.dump(2) + "\n";
}

RunResult run_scenario_full(const Scenario& scenario)
{
    Runner runner(scenario);
    return runner.run();
}

LatencyReport run_scenario(const Scenario& scenario)
{
    return run_scenario_full(scenario).report;
}

LatencyReport run_scenario(Scenario scenario, uint64_t seed_override)
{
    scenario.seed = seed_override;
    return run_scenario_full(scenario).report;
}

namespace {

    std::string describe_divergence(const std::map<repl::ObjectId, repl::ReplicatedObject>& stateful,
        const std::map<repl::ObjectId, repl::ReplicatedObject>& stateless, const schema::Schema& contract)
    {
        for (const auto& [id, object] : stateful) {
            const auto other = stateless.find(id);
            if (other == stateless.end())
                return "object " + std::to_string(id) + " missing from the stateless store";
            const schema::ClassDef* cls = schema::lookup_class(contract, object.class_id);
            for (const auto& prop : cls->properties) {
                if (!prop.replicated)
                    continue;
                const auto a = object.properties.find(prop.prop_id);
                const auto b = other->second.properties.find(prop.prop_id);
                const PropertyValue va = a == object.properties.end() ? default_value(prop.kind) : a->second;
                const PropertyValue vb = b == other->second.properties.end() ? default_value(prop.kind) : b->second;
                if (!(va == vb))
                    return "object " + std::to_string(id) + " prop '" + prop.key + "': stateful="
                        + to_string(va) + " stateless=" + to_string(vb);
            }
        }
        for (const auto& [id, object] : stateless)
            if (!stateful.count(id))
                return "object " + std::to_string(id) + " present only in the stateless store";
        return {};
    }

} // namespace

EquivalenceResult equivalence_check(const Scenario& base, int instances, uint64_t seed, bool cas_enabled)
{
    Scenario stateful = base;
    stateful.topology = Topology::StatefulDedicated;
    stateful.servers = 1;
    stateful.seed = seed;
    stateful.faults.clear();
    stateful.clock_sync = false;

    Scenario stateless = base;
    stateless.topology = Topology::StatelessRpc;
    stateless.servers = std::max(1, instances);
    stateless.seed = seed;
    stateless.cas_enabled = cas_enabled;
    stateless.pool_policy = "round_robin";
    stateless.faults.clear();
    stateless.clock_sync = false;

    const RunResult a = run_scenario_full(stateful);
    const RunResult b = run_scenario_full(stateless);

    EquivalenceResult result;
    if (!a.report.scripts_completed || !b.report.scripts_completed) {
        result.equal = false;
        result.divergence = "scripts did not complete within the scenario duration";
        return result;
    }
    const auto bytes_a = repl::canonical_world_bytes(a.final_objects, base.contract);
    const auto bytes_b = repl::canonical_world_bytes(b.final_objects, base.contract);
    result.equal = bytes_a == bytes_b;
    if (!result.equal) {
        result.divergence = describe_divergence(a.final_objects, b.final_objects, base.contract);
        if (result.divergence.empty())
            result.divergence = "canonical state bytes differ";
    }
    return result;
}

EquivalenceSweep equivalence_sweep(const Scenario& base, int instances, int seeds, bool cas_enabled)
{
    EquivalenceSweep sweep;
    for (int i = 0; i < seeds; ++i) {
        const uint64_t seed = base.seed + static_cast<uint64_t>(i);
        const auto result = equivalence_check(base, instances, seed, cas_enabled);
        ++sweep.seeds_run;
        if (!result.equal) {
            ++sweep.divergent;
            sweep.divergent_seeds.push_back(seed);
        }
    }
    return sweep;
}

CapacityResult capacity_sweep(const Scenario& base, bool scene_pinned, int backends,
    const std::vector<double>& offered_rps)
{
    CapacityResult result;
    for (const double offered : offered_rps) {
        Scenario s = base;
        s.topology = scene_pinned ? Topology::StatefulDedicated : Topology::StatelessRpc;
        s.servers = std::max(1, backends);
        s.script.op = "move";
        s.script.closed_loop = false;
        s.script.period_ms = static_cast<double>(s.clients) * 1000.0 / offered;
        s.script.ops_per_client = static_cast<int>((s.duration_ms * 0.8) / s.script.period_ms) + 1;
        s.timeout_ms = s.duration_ms * 10.0; // count only true completions
        s.pool_policy = "round_robin";
        s.clock_sync = false;

        const LatencyReport report = run_scenario(s);
        CapacityPoint point;
        point.offered_rps = offered;
        point.completed_rps = static_cast<double>(report.ops_completed) / (s.duration_ms / 1000.0);
        point.completion_ratio = report.ops_sent == 0
            ? 0.0
            : static_cast<double>(report.ops_completed) / static_cast<double>(report.ops_sent);
        if (point.completion_ratio >= 0.99)
            result.max_sustainable_rps = std::max(result.max_sustainable_rps, offered);
        result.points.push_back(point);
    }
    return result;
}

} // namespace worldsync::harness
