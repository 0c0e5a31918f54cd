#include "doctest.h"

#include "worldsync/error.hpp"
#include "worldsync/rpc.hpp"

using namespace worldsync;

namespace {

const schema::Schema kSchema = schema::parse_schema(
    "version 1\n"
    "rpc SetAppearance id=10 params=(int64,text) returns=none mode=unary\n"
    "rpc GetAppearance id=13 params=(int64) returns=text mode=unary\n"
    "rpc SubscribeTelemetry id=14 params=(int64) returns=vec3 mode=stream\n");

} // namespace

TEST_SUITE("rpc")
{
    TEST_CASE("request body round trips, server target")
    {
        rpc::RpcCall call;
        call.call_id = 77;
        call.method_id = 10;
        call.target = rpc::Target::Server;
        call.reliable = true;
        call.args = { PropertyValue { int64_t { 2 } }, PropertyValue { std::string("Luigi") } };
        const auto body = rpc::encode_request(call);
        const auto decoded = rpc::decode_request(body);
        CHECK(decoded.call_id == 77);
        CHECK(decoded.method_id == 10);
        CHECK(decoded.target == rpc::Target::Server);
        CHECK(decoded.reliable);
        CHECK(decoded.args == call.args);
    }

    TEST_CASE("request body round trips, client target carries the id")
    {
        rpc::RpcCall call;
        call.call_id = 1;
        call.method_id = 13;
        call.target = rpc::Target::Client;
        call.target_client = 42;
        call.args = { PropertyValue { int64_t { 5 } } };
        const auto decoded = rpc::decode_request(rpc::encode_request(call));
        CHECK(decoded.target == rpc::Target::Client);
        CHECK(decoded.target_client == 42);
    }

    TEST_CASE("response bodies: ok with value, app error with code, unroutable")
    {
        rpc::RpcResult ok { 9, rpc::Status::Ok, 0, PropertyValue { std::string("Mario") } };
        CHECK(rpc::decode_response(rpc::encode_response(ok)) == ok);

        rpc::RpcResult ok_empty { 10, rpc::Status::Ok, 0, std::nullopt };
        CHECK(rpc::decode_response(rpc::encode_response(ok_empty)) == ok_empty);

        rpc::RpcResult app_error { 11, rpc::Status::AppError, 7, std::nullopt };
        CHECK(rpc::decode_response(rpc::encode_response(app_error)) == app_error);

        rpc::RpcResult unroutable { 12, rpc::Status::Unroutable, 0, std::nullopt };
        CHECK(rpc::decode_response(rpc::encode_response(unroutable)) == unroutable);
    }

    TEST_CASE("stream data round trips")
    {
        rpc::StreamData data { 31, 4, PropertyValue { Vec3 { 1, 2, 3 } } };
        const auto decoded = rpc::decode_stream_data(rpc::encode_stream_data(data));
        CHECK(decoded.stream_id == 31);
        CHECK(decoded.seq == 4);
        CHECK(decoded.value == data.value);
    }

    TEST_CASE("argument checking happens before transmission")
    {
        try {
            rpc::check_args(kSchema, 10, std::vector<PropertyValue> { PropertyValue { std::string("wrong") } });
            FAIL("expected KindMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::kind_mismatch);
        }
        try {
            rpc::check_args(kSchema, 999, {});
            FAIL("expected UnknownMethod");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::unknown_method);
        }
    }

    TEST_CASE("handler sees the arguments verbatim")
    {
        rpc::Dispatcher dispatcher(kSchema);
        std::vector<PropertyValue> seen;
        dispatcher.register_handler(10, [&seen](const rpc::RpcContext&, const std::vector<PropertyValue>& args) {
            seen = args;
            return rpc::Outcome::ok();
        });
        rpc::RpcCall call;
        call.call_id = 5;
        call.method_id = 10;
        call.args = { PropertyValue { int64_t { 2 } }, PropertyValue { std::string("Luigi") } };
        const auto result = dispatcher.dispatch({ 1, 0.0 }, call);
        CHECK(result.status == rpc::Status::Ok);
        CHECK(seen == call.args);
    }

    TEST_CASE("double registration is rejected")
    {
        rpc::Dispatcher dispatcher(kSchema);
        dispatcher.register_handler(10, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
            return rpc::Outcome::ok();
        });
        try {
            dispatcher.register_handler(10, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
                return rpc::Outcome::ok();
            });
            FAIL("expected DuplicateHandler");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::duplicate_handler);
        }
    }

    TEST_CASE("registering against an undeclared method is rejected")
    {
        rpc::Dispatcher dispatcher(kSchema);
        try {
            dispatcher.register_handler(999, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
                return rpc::Outcome::ok();
            });
            FAIL("expected UnknownMethod");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::unknown_method);
        }
    }

    TEST_CASE("unregistered method dispatches to NOT_IMPLEMENTED")
    {
        rpc::Dispatcher dispatcher(kSchema);
        rpc::RpcCall call;
        call.call_id = 2;
        call.method_id = 13;
        call.args = { PropertyValue { int64_t { 1 } } };
        const auto result = dispatcher.dispatch({ 1, 0.0 }, call);
        CHECK(result.status == rpc::Status::AppError);
        CHECK(result.app_code == rpc::kAppErrorNotImplemented);
    }

    TEST_CASE("return value passes through only when the method declares one")
    {
        rpc::Dispatcher dispatcher(kSchema);
        dispatcher.register_handler(13, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
            return rpc::Outcome::ok(PropertyValue { std::string("Mario") });
        });
        dispatcher.register_handler(10, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
            return rpc::Outcome::ok(PropertyValue { std::string("ignored") });
        });

        rpc::RpcCall get;
        get.call_id = 1;
        get.method_id = 13;
        get.args = { PropertyValue { int64_t { 1 } } };
        const auto with_value = dispatcher.dispatch({ 1, 0.0 }, get);
        REQUIRE(with_value.value);
        CHECK(*with_value.value == PropertyValue { std::string("Mario") });

        rpc::RpcCall set;
        set.call_id = 2;
        set.method_id = 10;
        set.args = { PropertyValue { int64_t { 1 } }, PropertyValue { std::string("x") } };
        CHECK(!dispatcher.dispatch({ 1, 0.0 }, set).value); // returns=none
    }

    TEST_CASE("app errors propagate their code")
    {
        rpc::Dispatcher dispatcher(kSchema);
        dispatcher.register_handler(13, [](const rpc::RpcContext&, const std::vector<PropertyValue>&) {
            return rpc::Outcome::error(404);
        });
        rpc::RpcCall call;
        call.method_id = 13;
        call.args = { PropertyValue { int64_t { 1 } } };
        const auto result = dispatcher.dispatch({ 1, 0.0 }, call);
        CHECK(result.status == rpc::Status::AppError);
        CHECK(result.app_code == 404);
    }
}
