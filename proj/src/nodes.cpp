#include "worldsync/nodes.hpp"

#include "worldsync/error.hpp"

#include <algorithm>

namespace worldsync::nodes {

namespace {
    // Application error codes used by the built-in servers (1 is reserved
    // for NOT_IMPLEMENTED by the protocol).
    constexpr uint16_t kAppErrorBadRequest = 2;
    constexpr uint16_t kAppErrorStoreUnavailable = 3;
} // namespace

std::optional<MetricsHub::ServerCharge> MetricsHub::take_charge(uint32_t client_node, uint64_t call_id)
{
    const auto it = charges_.find({ client_node, call_id });
    if (it == charges_.end())
        return std::nullopt;
    auto out = it->second;
    charges_.erase(it);
    return out;
}

std::optional<double> MetricsHub::take_delta_emit(ClientId client, uint64_t tick)
{
    const auto it = delta_emits_.find({ client, tick });
    if (it == delta_emits_.end())
        return std::nullopt;
    const double out = it->second;
    delta_emits_.erase(it);
    return out;
}

std::optional<double> MetricsHub::take_stream_push(uint64_t stream_id, uint32_t seq)
{
    const auto it = stream_pushes_.find({ stream_id, seq });
    if (it == stream_pushes_.end())
        return std::nullopt;
    const double out = it->second;
    stream_pushes_.erase(it);
    return out;
}

std::vector<uint8_t> encode_join(ClientId proposed_id, uint32_t schema_version)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::Join));
    out.u32(proposed_id);
    out.u32(schema_version);
    return out.take();
}

std::pair<ClientId, uint32_t> decode_join(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::Join))
        raise(Errc::unknown_body_type, "not a join");
    const ClientId id = in.u32();
    const uint32_t version = in.u32();
    return { id, version };
}

std::vector<uint8_t> encode_join_ack(ClientId assigned_id, uint32_t schema_version)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::JoinAck));
    out.u32(assigned_id);
    out.u32(schema_version);
    return out.take();
}

std::pair<ClientId, uint32_t> decode_join_ack(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::JoinAck))
        raise(Errc::unknown_body_type, "not a join ack");
    const ClientId id = in.u32();
    const uint32_t version = in.u32();
    return { id, version };
}

// ---------------------------------------------------------------- GameServer

GameServer::GameServer(sim::Sim& sim, net::Network& network, MetricsHub& metrics, const schema::Schema& schema,
    Config config)
    : sim_(sim)
    , network_(network)
    , metrics_(metrics)
    , config_(std::move(config))
    , world_(schema)
    , dispatcher_(schema)
{
}

void GameServer::start()
{
    if (started_)
        return;
    started_ = true;
    auto& endpoint = network_.create_endpoint(config_.address);
    endpoint.set_handler([this](const net::Delivery& delivery) { on_frame(delivery); });
    sim_.schedule(sim_.now_ms() + config_.tick_interval_ms, [this]() { replication_tick(); });
}

net::Connection& GameServer::session(const net::Address& peer)
{
    auto& slot = connections_[peer];
    if (!slot) {
        slot = std::make_unique<net::Connection>(sim_, network_, config_.address, peer, config_.channel);
        slot->set_message_handler([this, peer](const net::InboundMessage& m) { on_message(peer, m); });
    }
    return *slot;
}

void GameServer::on_frame(const net::Delivery& delivery)
{
    if (down_)
        return; // dead servers drop everything on the floor
    session(delivery.from).handle_frame(delivery.frame);
}

void GameServer::on_message(const net::Address& from, const net::InboundMessage& message)
{
    if (down_)
        return;
    switch (wire::body_type(message.bytes)) {
    case wire::BodyType::Join:
        handle_join(from, message.bytes);
        break;
    case wire::BodyType::RpcRequest:
        handle_request(from, message.bytes, sim_.now_ms());
        break;
    case wire::BodyType::RpcResponse:
        handle_response(rpc::decode_response(message.bytes));
        break;
    case wire::BodyType::ClockPing: {
        // Answered off the busy queue: sync traffic must not wait for work.
        const double t0 = clocksync::decode_ping(message.bytes);
        const double now = sim_.now_ms();
        send_body(from, clocksync::encode_pong(t0, now, now), false);
        break;
    }
    default:
        raise(Errc::unknown_body_type, "unexpected body at server");
    }
}

void GameServer::handle_join(const net::Address& from, std::span<const uint8_t> body)
{
    const auto [proposed, version] = decode_join(body);
    (void)version; // the ack carries ours; the client decides compatibility

    ClientId id = proposed;
    const bool known = id != 0 && session_address_.count(id);
    if (id == 0)
        id = next_client_id_++;
    else
        next_client_id_ = std::max(next_client_id_, id + 1);

    if (known) {
        // Re-join (failover or address change): retire the old session. The
        // old connection object stays alive for its outstanding timers.
        const auto old_address = session_address_.at(id);
        address_client_.erase(old_address);
        if (old_address != from) {
            if (auto it = connections_.find(old_address); it != connections_.end()) {
                it->second->close();
                retired_connections_.push_back(std::move(it->second));
                connections_.erase(it);
            }
        }
    }
    address_client_[from] = id;
    session_address_[id] = from;

    send_body(from, encode_join_ack(id, world_.bound_schema().version), true);
    if (!known && on_client_joined)
        on_client_joined(id);

    const Vec3 viewpoint = viewpoint_provider ? viewpoint_provider(id) : Vec3 {};
    const auto snapshot = world_.full_snapshot({ id, viewpoint }, config_.relevance);
    send_body(from, repl::encode_snapshot(snapshot), true);
}

void GameServer::handle_request(const net::Address& from, std::span<const uint8_t> body, double arrive_ms)
{
    const rpc::RpcCall call = rpc::decode_request(body);
    const auto caller_it = address_client_.find(from);
    const ClientId caller = caller_it == address_client_.end() ? 0 : caller_it->second;

    switch (call.target) {
    case rpc::Target::Server: {
        const double start = std::max(sim_.now_ms(), busy_until_ms_);
        const double done = start + config_.service_time_ms;
        busy_until_ms_ = done;
        sim_.schedule(done, [this, call, from, caller, arrive_ms]() {
            if (down_)
                return; // queued work dies with the server
            ++rpc_handled_;
            rpc::RpcResult result;
            result.call_id = call.call_id;
            const schema::MethodDef* method = schema::lookup_method(world_.bound_schema(), call.method_id);
            if (method && method->mode == schema::MethodMode::ServerStream) {
                const auto handler = stream_handlers_.find(call.method_id);
                uint16_t code = rpc::kAppErrorNotImplemented;
                if (handler != stream_handlers_.end()) {
                    rpc::check_args(world_.bound_schema(), call.method_id, call.args);
                    code = handler->second(caller, call.args, call.call_id);
                }
                if (code == 0) {
                    streams_[call.call_id] = Stream { call.call_id, call.method_id, caller, 0, true };
                    metrics_.note_charge(from.node, call.call_id, { arrive_ms, sim_.now_ms(), 0.0 });
                    return; // the stream's closing response ends the call
                }
                result.status = rpc::Status::AppError;
                result.app_code = code;
            } else {
                try {
                    result = dispatcher_.dispatch({ caller, sim_.now_ms() }, call);
                } catch (const Error&) {
                    result.status = rpc::Status::AppError;
                    result.app_code = kAppErrorBadRequest;
                }
            }
            metrics_.note_charge(from.node, call.call_id, { arrive_ms, sim_.now_ms(), 0.0 });
            send_body(from, rpc::encode_response(result), call.reliable);
        });
        break;
    }
    case rpc::Target::Client: {
        // Relay to the owning client; the reply is routed back by call id.
        const auto target = session_address_.find(call.target_client);
        if (target == session_address_.end()) {
            rpc::RpcResult unroutable { call.call_id, rpc::Status::Unroutable, 0, std::nullopt };
            send_body(from, rpc::encode_response(unroutable), true);
            return;
        }
        rpc::RpcCall forwarded = call;
        forwarded.call_id = next_call_id_++;
        forwards_[forwarded.call_id] = Forwarded { caller, call.call_id };
        send_body(target->second, rpc::encode_request(forwarded), true);
        break;
    }
    case rpc::Target::Multicast: {
        // Fan out to every currently joined client; late joiners get nothing.
        for (const auto& [client, address] : session_address_)
            send_body(address, rpc::encode_request(call), true);
        rpc::RpcResult ack { call.call_id, rpc::Status::Ok, 0, std::nullopt };
        send_body(from, rpc::encode_response(ack), true);
        break;
    }
    }
}

void GameServer::handle_response(const rpc::RpcResult& result)
{
    if (const auto forwarded = forwards_.find(result.call_id); forwarded != forwards_.end()) {
        rpc::RpcResult rewritten = result;
        rewritten.call_id = forwarded->second.origin_call_id;
        const auto origin = session_address_.find(forwarded->second.origin);
        if (origin != session_address_.end())
            send_body(origin->second, rpc::encode_response(rewritten), true);
        forwards_.erase(forwarded);
        return;
    }
    if (const auto pending = pending_.find(result.call_id); pending != pending_.end()) {
        auto handler = std::move(pending->second);
        pending_.erase(pending);
        if (handler)
            handler(result);
    }
}

void GameServer::invoke(rpc::RpcCall call, std::function<void(const rpc::RpcResult&)> on_result)
{
    call.call_id = next_call_id_++;
    rpc::check_args(world_.bound_schema(), call.method_id, call.args);
    switch (call.target) {
    case rpc::Target::Client: {
        const auto target = session_address_.find(call.target_client);
        if (target == session_address_.end()) {
            if (on_result)
                on_result(rpc::RpcResult { call.call_id, rpc::Status::Unroutable, 0, std::nullopt });
            return;
        }
        if (on_result)
            pending_[call.call_id] = std::move(on_result);
        send_body(target->second, rpc::encode_request(call), true);
        break;
    }
    case rpc::Target::Multicast: {
        for (const auto& [client, address] : session_address_)
            send_body(address, rpc::encode_request(call), true);
        if (on_result)
            on_result(rpc::RpcResult { call.call_id, rpc::Status::Ok, 0, std::nullopt });
        break;
    }
    case rpc::Target::Server:
        raise(Errc::unroutable, "server-to-self call");
    }
}

void GameServer::set_stream_open_handler(uint16_t method_id, StreamOpenHandler handler)
{
    const schema::MethodDef* method = schema::lookup_method(world_.bound_schema(), method_id);
    if (!method)
        raise(Errc::unknown_method, "method id " + std::to_string(method_id));
    if (method->mode != schema::MethodMode::ServerStream)
        raise(Errc::not_a_stream_method, "method '" + method->name + "' is unary");
    if (stream_handlers_.count(method_id))
        raise(Errc::duplicate_handler, "stream method '" + method->name + "'");
    stream_handlers_[method_id] = std::move(handler);
}

void GameServer::push_stream(uint64_t stream_id, PropertyValue value)
{
    const auto it = streams_.find(stream_id);
    if (it == streams_.end() || !it->second.open)
        raise(Errc::stream_closed, "stream " + std::to_string(stream_id));
    Stream& stream = it->second;
    const schema::MethodDef* method = schema::lookup_method(world_.bound_schema(), stream.method_id);
    if (method->returns && kind_of(value) != *method->returns)
        raise(Errc::kind_mismatch, "stream value kind");
    metrics_.note_stream_push(stream_id, stream.next_seq, sim_.now_ms());
    rpc::StreamData data { stream_id, stream.next_seq++, std::move(value) };
    send_to_client(stream.client, rpc::encode_stream_data(data), true);
}

void GameServer::close_stream(uint64_t stream_id)
{
    const auto it = streams_.find(stream_id);
    if (it == streams_.end() || !it->second.open)
        raise(Errc::stream_closed, "stream " + std::to_string(stream_id));
    it->second.open = false;
    rpc::RpcResult end { stream_id, rpc::Status::Ok, 0, std::nullopt };
    send_to_client(it->second.client, rpc::encode_response(end), true);
}

std::vector<uint64_t> GameServer::open_streams() const
{
    std::vector<uint64_t> out;
    for (const auto& [id, stream] : streams_)
        if (stream.open)
            out.push_back(id);
    return out;
}

void GameServer::send_body(const net::Address& peer, std::vector<uint8_t> body, bool reliable)
{
    session(peer).send_message(reliable ? kMessageChannel : kControlChannel, reliable, std::move(body));
}

void GameServer::send_to_client(ClientId client, std::vector<uint8_t> body, bool reliable)
{
    const auto it = session_address_.find(client);
    if (it == session_address_.end())
        raise(Errc::unroutable, "client " + std::to_string(client) + " not joined");
    send_body(it->second, std::move(body), reliable);
}

void GameServer::replication_tick()
{
    if (down_)
        return;
    std::vector<repl::ClientView> views;
    views.reserve(session_address_.size());
    for (const auto& [client, address] : session_address_)
        views.push_back({ client, viewpoint_provider ? viewpoint_provider(client) : Vec3 {} });

    auto deltas = world_.collect_deltas(views, config_.relevance);
    for (auto& [client, delta] : deltas) {
        if (delta.objects.empty())
            continue;
        metrics_.note_delta_emit(client, delta.tick, sim_.now_ms());
        send_to_client(client, repl::encode_delta(delta), config_.reliable_deltas);
    }
    sim_.schedule(sim_.now_ms() + config_.tick_interval_ms, [this]() { replication_tick(); });
}

uint64_t GameServer::give_up_count() const
{
    uint64_t total = 0;
    for (const auto& [address, connection] : connections_)
        total += connection->give_up_count();
    return total;
}

// ----------------------------------------------------------- StatelessServer

StatelessServer::StatelessServer(sim::Sim& sim, net::Network& network, MetricsHub& metrics,
    const schema::Schema& schema, store::StateStore& store, store::WriteThroughCache* cache, Config config)
    : sim_(sim)
    , network_(network)
    , metrics_(metrics)
    , schema_(&schema)
    , store_(store)
    , cache_(cache)
    , config_(std::move(config))
{
}

void StatelessServer::start()
{
    auto& endpoint = network_.create_endpoint(config_.address);
    endpoint.set_handler([this](const net::Delivery& delivery) { on_frame(delivery); });
}

void StatelessServer::register_handler(uint16_t method_id, AsyncHandler handler)
{
    if (!schema::lookup_method(*schema_, method_id))
        raise(Errc::unknown_method, "method id " + std::to_string(method_id));
    if (handlers_.count(method_id))
        raise(Errc::duplicate_handler, "method id " + std::to_string(method_id));
    handlers_[method_id] = std::move(handler);
}

net::Connection& StatelessServer::session(const net::Address& peer)
{
    auto& slot = connections_[peer];
    if (!slot) {
        slot = std::make_unique<net::Connection>(sim_, network_, config_.address, peer, config_.channel);
        slot->set_message_handler([this, peer](const net::InboundMessage& m) { on_message(peer, m); });
    }
    return *slot;
}

void StatelessServer::on_frame(const net::Delivery& delivery)
{
    if (down_)
        return;
    session(delivery.from).handle_frame(delivery.frame);
}

void StatelessServer::on_message(const net::Address& from, const net::InboundMessage& message)
{
    if (down_)
        return;
    switch (wire::body_type(message.bytes)) {
    case wire::BodyType::ClockPing: {
        const double t0 = clocksync::decode_ping(message.bytes);
        const double now = sim_.now_ms();
        session(from).send_message(kControlChannel, false, clocksync::encode_pong(t0, now, now));
        break;
    }
    case wire::BodyType::Join: {
        // No session state: acknowledge the proposed identity and move on.
        const auto [proposed, version] = decode_join(message.bytes);
        (void)version;
        session(from).send_message(kMessageChannel, true, encode_join_ack(proposed, schema_->version));
        break;
    }
    case wire::BodyType::RpcRequest: {
        auto request = std::make_shared<Request>();
        request->call = rpc::decode_request(message.bytes);
        request->caller_node = from.node;
        request->reply_to = from;
        request->arrive_ms = sim_.now_ms();

        const auto handler = handlers_.find(request->call.method_id);
        if (handler == handlers_.end()) {
            respond(request,
                rpc::RpcResult { request->call.call_id, rpc::Status::AppError, rpc::kAppErrorNotImplemented, {} });
            return;
        }
        const double start = std::max(sim_.now_ms(), busy_until_ms_);
        const double done = start + config_.service_time_ms;
        busy_until_ms_ = done;
        auto run = handler->second;
        sim_.schedule(done, [this, request, run]() {
            if (down_)
                return;
            ++rpc_handled_;
            try {
                rpc::check_args(*schema_, request->call.method_id, request->call.args);
            } catch (const Error&) {
                respond(request,
                    rpc::RpcResult { request->call.call_id, rpc::Status::AppError, kAppErrorBadRequest, {} });
                return;
            }
            run(*this, request);
        });
        break;
    }
    default:
        raise(Errc::unknown_body_type, "unexpected body at stateless server");
    }
}

void StatelessServer::read_record(RequestPtr request, const std::string& key,
    std::function<void(std::optional<store::Record>)> next)
{
    store::GetResult result;
    try {
        result = cache_ ? cache_->get(key) : store_.get(key);
    } catch (const Error&) {
        respond(request,
            rpc::RpcResult { request->call.call_id, rpc::Status::AppError, kAppErrorStoreUnavailable, {} });
        return;
    }
    request->store_charge_ms += result.charge_ms;
    sim_.schedule(sim_.now_ms() + result.charge_ms,
        [this, next = std::move(next), record = std::move(result.record)]() {
            if (!down_)
                next(record);
        });
}

void StatelessServer::write_record(RequestPtr request, const std::string& key, uint64_t expected_version,
    std::vector<uint8_t> value, std::function<void(store::CasResult)> next)
{
    store::CasResult result;
    try {
        if (config_.cas_enabled) {
            result = cache_ ? cache_->cas(key, expected_version, std::move(value))
                            : store_.cas(key, expected_version, std::move(value));
        } else {
            // Blind write: last writer wins, no conflict is ever seen.
            const auto put = cache_ ? cache_->put(key, std::move(value)) : store_.put(key, std::move(value));
            result = store::CasResult { true, put.version, put.charge_ms };
        }
    } catch (const Error&) {
        respond(request,
            rpc::RpcResult { request->call.call_id, rpc::Status::AppError, kAppErrorStoreUnavailable, {} });
        return;
    }
    request->store_charge_ms += result.charge_ms;
    sim_.schedule(sim_.now_ms() + result.charge_ms, [this, next = std::move(next), result]() {
        if (!down_)
            next(result);
    });
}

void StatelessServer::respond(RequestPtr request, rpc::RpcResult result)
{
    if (down_)
        return;
    metrics_.note_charge(request->caller_node, request->call.call_id,
        { request->arrive_ms, sim_.now_ms(), request->store_charge_ms });
    session(request->reply_to)
        .send_message(request->call.reliable ? kMessageChannel : kControlChannel, request->call.reliable,
            rpc::encode_response(result));
}

// ------------------------------------------------------------- GameClient

GameClient::GameClient(sim::Sim& sim, net::Network& network, MetricsHub& metrics, const schema::Schema& schema,
    Config config)
    : sim_(sim)
    , network_(network)
    , metrics_(metrics)
    , schema_(&schema)
    , config_(std::move(config))
    , replica_(schema)
    , dispatcher_(schema)
{
}

void GameClient::start(double join_at_ms)
{
    auto& endpoint = network_.create_endpoint(config_.address);
    endpoint.set_handler([this](const net::Delivery& delivery) { on_frame(delivery); });
    if (config_.join)
        sim_.schedule(sim_.now_ms() + join_at_ms, [this]() { send_join(); });
    if (config_.clock_sync)
        sim_.schedule(sim_.now_ms() + join_at_ms, [this]() { schedule_clock_ping(); });
}

net::Connection& GameClient::link(const net::Address& peer)
{
    auto& slot = connections_[peer];
    if (!slot) {
        slot = std::make_unique<net::Connection>(sim_, network_, config_.address, peer, config_.channel);
        slot->set_message_handler([this, peer](const net::InboundMessage& m) { on_message(peer, m); });
    }
    return *slot;
}

void GameClient::drop_links()
{
    for (auto& [address, connection] : connections_) {
        connection->close();
        retired_links_.push_back(std::move(connection));
    }
    connections_.clear();
}

void GameClient::send_join()
{
    join_sent_ms_ = sim_.now_ms();
    link(config_.server).send_message(kMessageChannel, true, encode_join(config_.proposed_id, schema_->version));
}

void GameClient::reconnect(net::Address new_server)
{
    drop_links();
    config_.server = new_server;
    if (config_.join)
        send_join();
}

void GameClient::change_address(net::Address new_address)
{
    // A new source address is a new flow: in-flight traffic is stranded and
    // the session starts over, which is exactly the disruption the paper
    // attributes to dynamic client addresses.
    network_.rebind(config_.address, new_address);
    drop_links();
    config_.address = new_address;
    if (config_.join)
        send_join();
}

uint64_t GameClient::give_up_count() const
{
    uint64_t total = 0;
    for (const auto& [address, connection] : connections_)
        total += connection->give_up_count();
    for (const auto& connection : retired_links_)
        total += connection->give_up_count();
    return total;
}

double GameClient::timeout_ms() const
{
    return config_.timeout_ms > 0.0 ? config_.timeout_ms : 10.0 * config_.channel.rto_ms;
}

uint64_t GameClient::invoke(uint16_t method_id, std::vector<PropertyValue> args, bool reliable,
    ResultHandler on_result, const std::string& event_class)
{
    rpc::check_args(*schema_, method_id, args); // KindMismatch before transmission

    rpc::RpcCall call;
    call.call_id = next_call_id_++;
    call.method_id = method_id;
    call.target = rpc::Target::Server;
    call.reliable = reliable;
    call.args = std::move(args);

    PendingCall pending;
    pending.method_id = method_id;
    pending.sent_ms = sim_.now_ms();
    pending.event_class = event_class;
    pending.on_result = std::move(on_result);
    pending_.emplace(call.call_id, std::move(pending));

    const net::Address target = route_provider_ ? route_provider_() : config_.server;
    link(target).send_message(reliable ? kMessageChannel : kControlChannel, reliable, rpc::encode_request(call));
    arm_timeout(call.call_id);
    return call.call_id;
}

uint64_t GameClient::invoke_on_client(uint16_t method_id, ClientId target, std::vector<PropertyValue> args,
    ResultHandler on_result)
{
    rpc::check_args(*schema_, method_id, args);

    rpc::RpcCall call;
    call.call_id = next_call_id_++;
    call.method_id = method_id;
    call.target = rpc::Target::Client;
    call.target_client = target;
    call.reliable = true;
    call.args = std::move(args);

    PendingCall pending;
    pending.method_id = method_id;
    pending.sent_ms = sim_.now_ms();
    pending.event_class = "rpc";
    pending.on_result = std::move(on_result);
    pending_.emplace(call.call_id, std::move(pending));

    link(config_.server).send_message(kMessageChannel, true, rpc::encode_request(call));
    arm_timeout(call.call_id);
    return call.call_id;
}

uint64_t GameClient::open_stream(uint16_t method_id, std::vector<PropertyValue> args, StreamValueHandler on_value,
    StreamEndHandler on_end)
{
    const schema::MethodDef* method = schema::lookup_method(*schema_, method_id);
    if (!method)
        raise(Errc::unknown_method, "method id " + std::to_string(method_id));
    if (method->mode != schema::MethodMode::ServerStream)
        raise(Errc::not_a_stream_method, "method '" + method->name + "' is unary");
    rpc::check_args(*schema_, method_id, args);

    rpc::RpcCall call;
    call.call_id = next_call_id_++;
    call.method_id = method_id;
    call.target = rpc::Target::Server;
    call.reliable = true;
    call.args = std::move(args);

    PendingCall pending;
    pending.method_id = method_id;
    pending.sent_ms = sim_.now_ms();
    pending.is_stream = true;
    pending.on_value = std::move(on_value);
    pending.on_end = std::move(on_end);
    pending_.emplace(call.call_id, std::move(pending));

    link(config_.server).send_message(kMessageChannel, true, rpc::encode_request(call));
    return call.call_id;
}

void GameClient::arm_timeout(uint64_t call_id)
{
    sim_.schedule(sim_.now_ms() + timeout_ms(), [this, call_id]() {
        const auto it = pending_.find(call_id);
        if (it == pending_.end() || it->second.is_stream)
            return;
        auto pending = std::move(it->second);
        pending_.erase(it);
        metrics_.count_timeout();
        if (pending.on_result)
            pending.on_result(Completion { true, rpc::RpcResult { call_id, rpc::Status::Unroutable, 0, {} } });
    });
}

void GameClient::on_frame(const net::Delivery& delivery)
{
    const auto it = connections_.find(delivery.from);
    if (it != connections_.end())
        it->second->handle_frame(delivery.frame);
    // Frames from retired servers or stale addresses are dropped.
}

void GameClient::on_message(const net::Address& from, const net::InboundMessage& message)
{
    switch (wire::body_type(message.bytes)) {
    case wire::BodyType::JoinAck:
        handle_join_ack(message.bytes);
        break;
    case wire::BodyType::Snapshot: {
        const auto snapshot = repl::decode_snapshot(message.bytes);
        replica_.apply_snapshot(snapshot);
        ++snapshots_applied_;
        metrics_.record("join_snapshot", { sim_.now_ms() - join_sent_ms_, sim_.now_ms() - join_sent_ms_, 0, 0 });
        if (on_snapshot)
            on_snapshot();
        break;
    }
    case wire::BodyType::ReplicationDelta: {
        const auto delta = repl::decode_delta(message.bytes);
        if (!replica_.apply_delta(delta))
            break; // stale tick discarded
        ++deltas_applied_;
        if (const auto emitted = metrics_.take_delta_emit(id_, delta.tick)) {
            const double latency = sim_.now_ms() - *emitted;
            metrics_.record("replication_delta", { latency, latency, 0, 0 });
        }
        if (on_delta)
            on_delta(delta);
        break;
    }
    case wire::BodyType::RpcResponse:
        handle_response(message.bytes);
        break;
    case wire::BodyType::StreamData:
        handle_stream_data(message.bytes);
        break;
    case wire::BodyType::RpcRequest:
        handle_server_request(from, message.bytes);
        break;
    case wire::BodyType::ClockPong: {
        const auto pong = clocksync::decode_pong(message.bytes);
        clock_tracker_.add_sample({ pong.t0, pong.t1, pong.t2, local_now_ms() });
        break;
    }
    default:
        raise(Errc::unknown_body_type, "unexpected body at client");
    }
}

void GameClient::handle_join_ack(std::span<const uint8_t> body)
{
    const auto [assigned, version] = decode_join_ack(body);
    id_ = assigned;
    replica_.set_server_schema_version(version);
    joined_ = true;
    if (on_joined)
        on_joined();
}

void GameClient::handle_response(std::span<const uint8_t> body)
{
    const auto result = rpc::decode_response(body);
    const auto it = pending_.find(result.call_id);
    if (it == pending_.end())
        return; // timed out earlier, or a stray duplicate
    if (it->second.is_stream) {
        auto pending = std::move(it->second);
        pending_.erase(it);
        if (pending.on_end)
            pending.on_end();
        return;
    }
    auto pending = std::move(it->second);
    pending_.erase(it);

    const double total = sim_.now_ms() - pending.sent_ms;
    MetricsHub::Event event { total, total, 0, 0 };
    if (const auto charge = metrics_.take_charge(config_.address.node, result.call_id)) {
        const double server_span = charge->respond_ms - charge->arrive_ms;
        event.store_ms = charge->store_ms;
        event.processing_ms = server_span - charge->store_ms;
        event.network_ms = total - server_span;
    }
    metrics_.record(pending.event_class, event);
    if (pending.on_result)
        pending.on_result(Completion { false, result });
}

void GameClient::handle_stream_data(std::span<const uint8_t> body)
{
    const auto data = rpc::decode_stream_data(body);
    const auto it = pending_.find(data.stream_id);
    if (it == pending_.end() || !it->second.is_stream)
        return;
    // The reliable channel already ordered these; the counter is a guard.
    if (data.seq != it->second.next_stream_seq)
        raise(Errc::inconsistent_fragment_set, "stream sequence gap");
    ++it->second.next_stream_seq;
    if (const auto pushed = metrics_.take_stream_push(data.stream_id, data.seq)) {
        const double latency = sim_.now_ms() - *pushed;
        metrics_.record("stream_push", { latency, latency, 0, 0 });
    }
    if (it->second.on_value)
        it->second.on_value(data.seq, data.value);
}

void GameClient::handle_server_request(const net::Address& from, std::span<const uint8_t> body)
{
    const auto call = rpc::decode_request(body);
    rpc::RpcResult result;
    try {
        result = dispatcher_.dispatch({ 0, sim_.now_ms() }, call);
    } catch (const Error&) {
        result.call_id = call.call_id;
        result.status = rpc::Status::AppError;
        result.app_code = kAppErrorBadRequest;
    }
    link(from).send_message(kMessageChannel, true, rpc::encode_response(result));
}

void GameClient::schedule_clock_ping()
{
    link(config_.server).send_message(kControlChannel, false, clocksync::encode_ping(local_now_ms()));
    sim_.schedule(sim_.now_ms() + config_.clock_ping_interval_ms, [this]() { schedule_clock_ping(); });
}

} // namespace worldsync::nodes
