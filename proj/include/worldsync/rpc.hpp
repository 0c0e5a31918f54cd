#pragma once

#include "worldsync/schema.hpp"
#include "worldsync/wire.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace worldsync::rpc {

enum class Target : uint8_t {
    Server = 0,
    Client = 1,
    Multicast = 2,
};

struct RpcCall {
    uint64_t call_id = 0;
    uint16_t method_id = 0;
    Target target = Target::Server;
    uint32_t target_client = 0; // meaningful when target == Client
    bool reliable = true;
    std::vector<PropertyValue> args;
};

enum class Status : uint8_t {
    Ok = 0,
    AppError = 1,
    Unroutable = 2,
};

// Application error codes are application-defined except this one.
inline constexpr uint16_t kAppErrorNotImplemented = 1;

struct RpcResult {
    uint64_t call_id = 0;
    Status status = Status::Ok;
    uint16_t app_code = 0; // meaningful when status == AppError
    std::optional<PropertyValue> value;

    friend bool operator==(const RpcResult&, const RpcResult&) = default;
};

struct StreamData {
    uint64_t stream_id = 0;
    uint32_t seq = 0;
    PropertyValue value;
};

// Body codecs (0x03 / 0x04 / 0x09).
std::vector<uint8_t> encode_request(const RpcCall& call);
RpcCall decode_request(std::span<const uint8_t> body);
std::vector<uint8_t> encode_response(const RpcResult& result);
RpcResult decode_response(std::span<const uint8_t> body);
std::vector<uint8_t> encode_stream_data(const StreamData& data);
StreamData decode_stream_data(std::span<const uint8_t> body);

// Contract check applied before transmission: throws UnknownMethod or
// KindMismatch when args disagree with the method signature.
void check_args(const schema::Schema& schema, uint16_t method_id, std::span<const PropertyValue> args);

struct RpcContext {
    uint32_t caller = 0; // client id, or 0 for server-originated calls
    double now_ms = 0.0;
};

// Handler outcome: app_code 0 means success.
struct Outcome {
    uint16_t app_code = 0;
    std::optional<PropertyValue> value;

    static Outcome ok() { return {}; }
    static Outcome ok(PropertyValue v) { return { 0, std::move(v) }; }
    static Outcome error(uint16_t code) { return { code, std::nullopt }; }
};

using Handler = std::function<Outcome(const RpcContext&, const std::vector<PropertyValue>&)>;

// Unary method dispatch. Handlers run on the owner's tick loop; results
// are routed back by call_id by the session layer.
class Dispatcher {
public:
    explicit Dispatcher(const schema::Schema& schema)
        : schema_(&schema)
    {
    }

    void register_handler(uint16_t method_id, Handler handler); // DuplicateHandler, UnknownMethod
    bool has_handler(uint16_t method_id) const { return handlers_.count(method_id) != 0; }

    // Executes the handler for a decoded call. Unregistered methods yield
    // AppError(NOT_IMPLEMENTED); argument mismatches yield KindMismatch.
    RpcResult dispatch(const RpcContext& context, const RpcCall& call) const;

    const schema::Schema& bound_schema() const { return *schema_; }

private:
    const schema::Schema* schema_;
    std::map<uint16_t, Handler> handlers_;
};

} // namespace worldsync::rpc
