#include "worldsync/rpc.hpp"

#include "worldsync/error.hpp"

namespace worldsync::rpc {

std::vector<uint8_t> encode_request(const RpcCall& call)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::RpcRequest));
    out.u64(call.call_id);
    out.u16(call.method_id);
    out.u8(static_cast<uint8_t>(call.target));
    if (call.target == Target::Client)
        out.u32(call.target_client);
    out.u8(call.reliable ? 1 : 0);
    out.u8(static_cast<uint8_t>(call.args.size()));
    for (const auto& arg : call.args)
        wire::encode_value(arg, out);
    return out.take();
}

RpcCall decode_request(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::RpcRequest))
        raise(Errc::unknown_body_type, "not an rpc request");
    RpcCall call;
    call.call_id = in.u64();
    call.method_id = in.u16();
    const uint8_t target = in.u8();
    if (target > static_cast<uint8_t>(Target::Multicast))
        raise(Errc::unknown_tag, "rpc target " + std::to_string(target));
    call.target = static_cast<Target>(target);
    if (call.target == Target::Client)
        call.target_client = in.u32();
    call.reliable = in.u8() != 0;
    const uint8_t argc = in.u8();
    call.args.reserve(argc);
    for (uint8_t i = 0; i < argc; ++i)
        call.args.push_back(wire::decode_value(in));
    return call;
}

std::vector<uint8_t> encode_response(const RpcResult& result)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::RpcResponse));
    out.u64(result.call_id);
    out.u8(static_cast<uint8_t>(result.status));
    if (result.status == Status::AppError)
        out.u16(result.app_code);
    if (result.value)
        wire::encode_value(*result.value, out);
    return out.take();
}

RpcResult decode_response(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::RpcResponse))
        raise(Errc::unknown_body_type, "not an rpc response");
    RpcResult result;
    result.call_id = in.u64();
    const uint8_t status = in.u8();
    if (status > static_cast<uint8_t>(Status::Unroutable))
        raise(Errc::unknown_tag, "rpc status " + std::to_string(status));
    result.status = static_cast<Status>(status);
    if (result.status == Status::AppError)
        result.app_code = in.u16();
    if (in.remaining() > 0)
        result.value = wire::decode_value(in);
    return result;
}

std::vector<uint8_t> encode_stream_data(const StreamData& data)
{
    wire::ByteWriter out;
    out.u8(static_cast<uint8_t>(wire::BodyType::StreamData));
    out.u64(data.stream_id);
    out.u32(data.seq);
    wire::encode_value(data.value, out);
    return out.take();
}

StreamData decode_stream_data(std::span<const uint8_t> body)
{
    wire::ByteReader in(body);
    if (in.u8() != static_cast<uint8_t>(wire::BodyType::StreamData))
        raise(Errc::unknown_body_type, "not stream data");
    StreamData data;
    data.stream_id = in.u64();
    data.seq = in.u32();
    data.value = wire::decode_value(in);
    return data;
}

void check_args(const schema::Schema& schema, uint16_t method_id, std::span<const PropertyValue> args)
{
    const schema::MethodDef* method = schema::lookup_method(schema, method_id);
    if (!method)
        raise(Errc::unknown_method, "method id " + std::to_string(method_id));
    if (method->params.size() != args.size())
        raise(Errc::kind_mismatch,
            "method '" + method->name + "' takes " + std::to_string(method->params.size()) + " args, got "
                + std::to_string(args.size()));
    for (size_t i = 0; i < args.size(); ++i)
        if (kind_of(args[i]) != method->params[i])
            raise(Errc::kind_mismatch,
                "method '" + method->name + "' arg " + std::to_string(i) + " expects "
                    + kind_name(method->params[i]) + ", got " + kind_name(kind_of(args[i])));
}

void Dispatcher::register_handler(uint16_t method_id, Handler handler)
{
    const schema::MethodDef* method = schema::lookup_method(*schema_, method_id);
    if (!method)
        raise(Errc::unknown_method, "method id " + std::to_string(method_id));
    if (handlers_.count(method_id))
        raise(Errc::duplicate_handler, "method '" + method->name + "'");
    handlers_.emplace(method_id, std::move(handler));
}

RpcResult Dispatcher::dispatch(const RpcContext& context, const RpcCall& call) const
{
    RpcResult result;
    result.call_id = call.call_id;

    const schema::MethodDef* method = schema::lookup_method(*schema_, call.method_id);
    if (!method) {
        result.status = Status::AppError;
        result.app_code = kAppErrorNotImplemented;
        return result;
    }
    check_args(*schema_, call.method_id, call.args);

    const auto it = handlers_.find(call.method_id);
    if (it == handlers_.end()) {
        result.status = Status::AppError;
        result.app_code = kAppErrorNotImplemented;
        return result;
    }
    const Outcome outcome = it->second(context, call.args);
    if (outcome.app_code != 0) {
        result.status = Status::AppError;
        result.app_code = outcome.app_code;
        return result;
    }
    result.status = Status::Ok;
    if (method->returns && outcome.value)
        result.value = outcome.value;
    return result;
}

} // namespace worldsync::rpc
