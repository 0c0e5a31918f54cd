#pragma once

#include "worldsync/channel.hpp"
#include "worldsync/clocksync.hpp"
#include "worldsync/replication.hpp"
#include "worldsync/rpc.hpp"
#include "worldsync/statestore.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace worldsync::nodes {

using repl::ClientId;

inline constexpr uint8_t kControlChannel = 0; // unreliable: clock pings, unreliable deltas
inline constexpr uint8_t kMessageChannel = 1; // reliable: join, rpc, deltas, snapshots, streams

// Shared measurement sink. Everything runs in one process, so server-side
// charge breakdowns reach the measuring client through here instead of
// widening the wire format.
class MetricsHub {
public:
    struct Event {
        double total_ms = 0.0;
        double network_ms = 0.0;
        double store_ms = 0.0;
        double processing_ms = 0.0;
    };
    struct ServerCharge {
        double arrive_ms = 0.0;
        double respond_ms = 0.0;
        double store_ms = 0.0;
    };

    void record(const std::string& event_class, Event event) { events_[event_class].push_back(event); }

    void note_charge(uint32_t client_node, uint64_t call_id, ServerCharge charge)
    {
        charges_[{ client_node, call_id }] = charge;
    }
    std::optional<ServerCharge> take_charge(uint32_t client_node, uint64_t call_id);

    void note_delta_emit(ClientId client, uint64_t tick, double time_ms) { delta_emits_[{ client, tick }] = time_ms; }
    std::optional<double> take_delta_emit(ClientId client, uint64_t tick);

    void note_stream_push(uint64_t stream_id, uint32_t seq, double time_ms)
    {
        stream_pushes_[{ stream_id, seq }] = time_ms;
    }
    std::optional<double> take_stream_push(uint64_t stream_id, uint32_t seq);

    void count_disruption() { ++disruptions_; }
    void count_timeout() { ++timeouts_; }
    void count_retry() { ++retries_; }
    void count_failure() { ++failures_; }

    const std::map<std::string, std::vector<Event>>& events() const { return events_; }
    uint64_t disruptions() const { return disruptions_; }
    uint64_t timeouts() const { return timeouts_; }
    uint64_t retries() const { return retries_; }
    uint64_t failures() const { return failures_; }

private:
    std::map<std::string, std::vector<Event>> events_;
    std::map<std::pair<uint32_t, uint64_t>, ServerCharge> charges_;
    std::map<std::pair<ClientId, uint64_t>, double> delta_emits_;
    std::map<std::pair<uint64_t, uint32_t>, double> stream_pushes_;
    uint64_t disruptions_ = 0;
    uint64_t timeouts_ = 0;
    uint64_t retries_ = 0;
    uint64_t failures_ = 0;
};

// Stateful dedicated server: authoritative world, replication ticks, RPC
// dispatch, join snapshots, client-initiated server-push streams. One
// instance == one scene; every client of the scene must reach it.
class GameServer {
public:
    struct Config {
        net::Address address;
        net::ChannelConfig channel;
        double tick_interval_ms = 50.0;
        double service_time_ms = 0.0; // per-request processing charge
        repl::RelevanceRule relevance;
        bool reliable_deltas = true;
    };

    GameServer(sim::Sim& sim, net::Network& network, MetricsHub& metrics, const schema::Schema& schema,
        Config config);

    void start();
    void stop() { down_ = true; } // dead: drops every inbound frame
    bool down() const { return down_; }

    repl::ServerWorld& world() { return world_; }
    rpc::Dispatcher& dispatcher() { return dispatcher_; }

    // Server-originated calls: target Client(id) or Multicast.
    void invoke(rpc::RpcCall call, std::function<void(const rpc::RpcResult&)> on_result = {});

    // Streams: opened by clients on ServerStream methods, pushed and closed
    // here. Handler returns an app code (0 accepts the stream).
    using StreamOpenHandler = std::function<uint16_t(ClientId, const std::vector<PropertyValue>&, uint64_t stream_id)>;
    void set_stream_open_handler(uint16_t method_id, StreamOpenHandler handler);
    void push_stream(uint64_t stream_id, PropertyValue value); // throws StreamClosed
    void close_stream(uint64_t stream_id); // throws StreamClosed
    std::vector<uint64_t> open_streams() const;

    std::function<void(ClientId)> on_client_joined;
    std::function<Vec3(ClientId)> viewpoint_provider; // defaults to origin

    const std::map<ClientId, net::Address>& sessions() const { return session_address_; }
    uint64_t rpc_handled() const { return rpc_handled_; }
    uint64_t give_up_count() const;
    const Config& config() const { return config_; }

private:
    struct Stream {
        uint64_t stream_id = 0;
        uint16_t method_id = 0;
        ClientId client = 0;
        uint32_t next_seq = 0;
        bool open = true;
    };

    struct Forwarded {
        ClientId origin;
        uint64_t origin_call_id = 0;
    };

    net::Connection& session(const net::Address& peer);
    void on_frame(const net::Delivery& delivery);
    void on_message(const net::Address& from, const net::InboundMessage& message);
    void handle_join(const net::Address& from, std::span<const uint8_t> body);
    void handle_request(const net::Address& from, std::span<const uint8_t> body, double arrive_ms);
    void handle_response(const rpc::RpcResult& result);
    void send_body(const net::Address& peer, std::vector<uint8_t> body, bool reliable);
    void send_to_client(ClientId client, std::vector<uint8_t> body, bool reliable);
    void replication_tick();

    sim::Sim& sim_;
    net::Network& network_;
    MetricsHub& metrics_;
    Config config_;
    repl::ServerWorld world_;
    rpc::Dispatcher dispatcher_;
    std::map<uint16_t, StreamOpenHandler> stream_handlers_;
    std::map<net::Address, std::unique_ptr<net::Connection>> connections_;
    std::vector<std::unique_ptr<net::Connection>> retired_connections_;
    std::map<net::Address, ClientId> address_client_;
    std::map<ClientId, net::Address> session_address_;
    std::map<uint64_t, Stream> streams_;
    std::map<uint64_t, Forwarded> forwards_;
    std::map<uint64_t, std::function<void(const rpc::RpcResult&)>> pending_;
    ClientId next_client_id_ = 1;
    uint64_t next_call_id_ = 1;
    double busy_until_ms_ = 0.0;
    uint64_t rpc_handled_ = 0;
    bool down_ = false;
    bool started_ = false;
};

// Stateless RPC server: no session state survives a request. Handlers run
// against a shared store through explicitly timed read/write steps, so
// interleavings between instances are real and cas conflicts can happen.
class StatelessServer {
public:
    struct Config {
        net::Address address;
        net::ChannelConfig channel;
        double service_time_ms = 0.0;
        bool cas_enabled = true; // false = blind writes (the lost-update control)
    };

    struct Request {
        rpc::RpcCall call;
        uint32_t caller_node = 0;
        net::Address reply_to;
        double arrive_ms = 0.0;
        double store_charge_ms = 0.0;
        int attempts = 0;
    };
    using RequestPtr = std::shared_ptr<Request>;
    using AsyncHandler = std::function<void(StatelessServer&, RequestPtr)>;

    StatelessServer(sim::Sim& sim, net::Network& network, MetricsHub& metrics, const schema::Schema& schema,
        store::StateStore& store, store::WriteThroughCache* cache, Config config);

    void start();
    void stop() { down_ = true; }
    bool down() const { return down_; }

    void register_handler(uint16_t method_id, AsyncHandler handler);

    // Continuation helpers; each schedules its continuation after the
    // simulated store charge has elapsed.
    void read_record(RequestPtr request, const std::string& key,
        std::function<void(std::optional<store::Record>)> next);
    void write_record(RequestPtr request, const std::string& key, uint64_t expected_version,
        std::vector<uint8_t> value, std::function<void(store::CasResult)> next);
    void respond(RequestPtr request, rpc::RpcResult result);

    bool cas_enabled() const { return config_.cas_enabled; }
    const schema::Schema& bound_schema() const { return *schema_; }
    uint64_t rpc_handled() const { return rpc_handled_; }

private:
    net::Connection& session(const net::Address& peer);
    void on_frame(const net::Delivery& delivery);
    void on_message(const net::Address& from, const net::InboundMessage& message);

    sim::Sim& sim_;
    net::Network& network_;
    MetricsHub& metrics_;
    const schema::Schema* schema_;
    store::StateStore& store_;
    store::WriteThroughCache* cache_;
    Config config_;
    std::map<uint16_t, AsyncHandler> handlers_;
    std::map<net::Address, std::unique_ptr<net::Connection>> connections_;
    double busy_until_ms_ = 0.0;
    uint64_t rpc_handled_ = 0;
    bool down_ = false;
};

// Client: joins a server, mirrors replicated state, invokes RPCs, opens
// streams, and keeps a clock-sync estimate against the server.
class GameClient {
public:
    struct Config {
        net::Address address;
        net::Address server;
        net::ChannelConfig channel;
        bool join = true;
        ClientId proposed_id = 0; // 0 lets the server assign
        bool clock_sync = false;
        double clock_ping_interval_ms = 500.0;
        double clock_offset_ms = 0.0; // this client's true local-clock offset
        double timeout_ms = 0.0; // 0 derives 10 x rto
    };

    struct Completion {
        bool timed_out = false;
        rpc::RpcResult result;
    };
    using ResultHandler = std::function<void(const Completion&)>;
    using StreamValueHandler = std::function<void(uint32_t seq, const PropertyValue&)>;
    using StreamEndHandler = std::function<void()>;

    GameClient(sim::Sim& sim, net::Network& network, MetricsHub& metrics, const schema::Schema& schema,
        Config config);

    void start(double join_at_ms = 0.0);

    uint64_t invoke(uint16_t method_id, std::vector<PropertyValue> args, bool reliable, ResultHandler on_result,
        const std::string& event_class = "rpc");
    // Client-targeted call, relayed by the server to the owning client.
    uint64_t invoke_on_client(uint16_t method_id, ClientId target, std::vector<PropertyValue> args,
        ResultHandler on_result);
    uint64_t open_stream(uint16_t method_id, std::vector<PropertyValue> args, StreamValueHandler on_value,
        StreamEndHandler on_end); // throws NotAStreamMethod

    // Point the client at a new server (failover): fresh connection, and a
    // re-join when joining is enabled.
    void reconnect(net::Address new_server);
    // Simulated dynamic IP change: rebinds the endpoint to a new address.
    void change_address(net::Address new_address);

    // Per-request routing (the stateless tier): when set, every invoke asks
    // the provider which backend to talk to and keeps one link per backend.
    void set_route_provider(std::function<net::Address()> provider) { route_provider_ = std::move(provider); }

    double local_now_ms() const { return sim_.now_ms() + config_.clock_offset_ms; }

    ClientId id() const { return id_; }
    bool joined() const { return joined_; }
    repl::ClientReplica& replica() { return replica_; }
    rpc::Dispatcher& dispatcher() { return dispatcher_; }
    const clocksync::OffsetTracker& clock_tracker() const { return clock_tracker_; }
    net::Address address() const { return config_.address; }
    net::Address server_address() const { return config_.server; }
    uint64_t give_up_count() const;
    uint64_t snapshots_applied() const { return snapshots_applied_; }
    uint64_t deltas_applied() const { return deltas_applied_; }

    std::function<void()> on_joined;
    std::function<void()> on_snapshot;
    std::function<void(const repl::DeltaMessage&)> on_delta;

private:
    struct PendingCall {
        uint16_t method_id = 0;
        double sent_ms = 0.0;
        std::string event_class;
        ResultHandler on_result;
        bool is_stream = false;
        StreamValueHandler on_value;
        StreamEndHandler on_end;
        uint32_t next_stream_seq = 0;
    };

    net::Connection& link(const net::Address& peer);
    void drop_links();
    void send_join();
    void on_frame(const net::Delivery& delivery);
    void on_message(const net::Address& from, const net::InboundMessage& message);
    void handle_join_ack(std::span<const uint8_t> body);
    void handle_response(std::span<const uint8_t> body);
    void handle_stream_data(std::span<const uint8_t> body);
    void handle_server_request(const net::Address& from, std::span<const uint8_t> body);
    void schedule_clock_ping();
    void arm_timeout(uint64_t call_id);
    double timeout_ms() const;

    sim::Sim& sim_;
    net::Network& network_;
    MetricsHub& metrics_;
    const schema::Schema* schema_;
    Config config_;
    repl::ClientReplica replica_;
    rpc::Dispatcher dispatcher_;
    std::map<net::Address, std::unique_ptr<net::Connection>> connections_;
    // Replaced links stay alive until the client dies: their outstanding
    // timer events still reference them.
    std::vector<std::unique_ptr<net::Connection>> retired_links_;
    std::function<net::Address()> route_provider_;
    clocksync::OffsetTracker clock_tracker_;
    std::map<uint64_t, PendingCall> pending_;
    uint64_t next_call_id_ = 1;
    ClientId id_ = 0;
    bool joined_ = false;
    double join_sent_ms_ = 0.0;
    uint64_t snapshots_applied_ = 0;
    uint64_t deltas_applied_ = 0;
};

// Join / JoinAck body codecs (0x07 / 0x08).
std::vector<uint8_t> encode_join(ClientId proposed_id, uint32_t schema_version);
std::pair<ClientId, uint32_t> decode_join(std::span<const uint8_t> body);
std::vector<uint8_t> encode_join_ack(ClientId assigned_id, uint32_t schema_version);
std::pair<ClientId, uint32_t> decode_join_ack(std::span<const uint8_t> body);

} // namespace worldsync::nodes
