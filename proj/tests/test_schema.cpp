#include "doctest.h"

#include "worldsync/error.hpp"
#include "worldsync/rng.hpp"
#include "worldsync/schema.hpp"

#include <fstream>
#include <sstream>

using namespace worldsync;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string kFixturePath = std::string(WORLDSYNC_TEST_DATA_DIR) + "/avatar.wsc";

// Reference hand-parse of the fixture: built field by field, independent of
// the parser.
schema::Schema fixture_by_hand()
{
    using namespace schema;
    Schema s;
    s.version = 1;
    s.classes = {
        ClassDef { "Avatar", 1,
            {
                PropertyDef { "appearance", 1, ValueKind::Text, true },
                PropertyDef { "position", 2, ValueKind::Vec3, true },
                PropertyDef { "score", 3, ValueKind::Int64, true },
                PropertyDef { "debug_note", 4, ValueKind::Text, false },
            } },
        ClassDef { "Beacon", 2, { PropertyDef { "label", 1, ValueKind::Text, true } } },
    };
    s.methods = {
        MethodDef { "SetAppearance", 10, { ValueKind::Int64, ValueKind::Text }, std::nullopt, MethodMode::Unary },
        MethodDef { "MoveTo", 11, { ValueKind::Int64, ValueKind::Vec3 }, std::nullopt, MethodMode::Unary },
        MethodDef { "AdjustScore", 12, { ValueKind::Int64, ValueKind::Int64 }, ValueKind::Int64, MethodMode::Unary },
        MethodDef { "GetAppearance", 13, { ValueKind::Int64 }, ValueKind::Text, MethodMode::Unary },
        MethodDef { "SubscribeTelemetry", 14, { ValueKind::Int64 }, ValueKind::Vec3, MethodMode::ServerStream },
    };
    return s;
}

} // namespace

TEST_SUITE("schema")
{
    TEST_CASE("empty source parses to the empty schema")
    {
        const auto s = schema::parse_schema("");
        CHECK(s.version == 0);
        CHECK(s.classes.empty());
        CHECK(s.methods.empty());
    }

    TEST_CASE("fixture parses to the hand-built reference")
    {
        const auto parsed = schema::parse_schema(read_file(kFixturePath));
        CHECK(parsed == fixture_by_hand());
        CHECK(schema::validate_schema(parsed).empty());
    }

    TEST_CASE("single class with two properties and one method")
    {
        const auto s = schema::parse_schema(
            "version 1\n"
            "class Avatar id=1\n"
            "  prop appearance id=1 kind=text replicated\n"
            "  prop position id=2 kind=vec3 replicated\n"
            "end\n"
            "rpc SetAppearance id=10 params=(text) returns=none mode=unary\n");
        REQUIRE(s.classes.size() == 1);
        CHECK(s.classes[0].name == "Avatar");
        CHECK(s.classes[0].class_id == 1);
        REQUIRE(s.classes[0].properties.size() == 2);
        CHECK(s.classes[0].properties[0].prop_id == 1);
        CHECK(s.classes[0].properties[1].kind == ValueKind::Vec3);
        REQUIRE(s.methods.size() == 1);
        CHECK(s.methods[0].method_id == 10);
    }

    TEST_CASE("duplicate method id is a parse error")
    {
        const char* source = "rpc A id=7 params=() returns=none mode=unary\n"
                             "rpc B id=7 params=() returns=none mode=unary\n";
        CHECK_THROWS_WITH_AS(schema::parse_schema(source), doctest::Contains("7"), Error);
        try {
            schema::parse_schema(source);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::duplicate_id);
        }
    }

    TEST_CASE("unknown kind token")
    {
        try {
            schema::parse_schema("class C id=1\n  prop p id=1 kind=quaternion\nend\n");
            FAIL("expected UnknownKind");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::unknown_kind);
        }
    }

    TEST_CASE("syntax errors carry the line number")
    {
        try {
            schema::parse_schema("version 1\nbogus directive\n");
            FAIL("expected SyntaxError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::syntax_error);
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    TEST_CASE("validate: duplicate prop id inside a class")
    {
        auto s = fixture_by_hand();
        s.classes[0].properties[1].prop_id = 3; // collides with score
        const auto violations = schema::validate_schema(s);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("Avatar") != std::string::npos);
        CHECK(violations[0].find("3") != std::string::npos);
    }

    TEST_CASE("validate: stream method without return kind")
    {
        auto s = fixture_by_hand();
        s.methods[4].returns.reset();
        const auto violations = schema::validate_schema(s);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("SubscribeTelemetry") != std::string::npos);
    }

    TEST_CASE("validate: every single-field mutation that breaks an invariant is caught")
    {
        // Each mutator breaks exactly one invariant of the valid fixture.
        using Mutator = void (*)(schema::Schema&);
        const Mutator mutators[] = {
            [](schema::Schema& s) { s.classes[1].name = "Avatar"; },
            [](schema::Schema& s) { s.classes[1].class_id = 1; },
            [](schema::Schema& s) { s.classes[0].properties[1].key = "appearance"; },
            [](schema::Schema& s) { s.classes[0].properties[1].prop_id = 1; },
            [](schema::Schema& s) { s.classes[0].properties[0].kind = static_cast<ValueKind>(99); },
            [](schema::Schema& s) { s.methods[1].method_id = 10; },
            [](schema::Schema& s) { s.methods[4].returns.reset(); },
            [](schema::Schema& s) { s.methods[0].params[0] = static_cast<ValueKind>(42); },
        };
        for (const auto& mutate : mutators) {
            auto s = fixture_by_hand();
            mutate(s);
            CHECK(!schema::validate_schema(s).empty());
        }
    }

    TEST_CASE("lookup_method")
    {
        const auto s = schema::parse_schema(read_file(kFixturePath));
        const auto* method = schema::lookup_method(s, 12);
        REQUIRE(method != nullptr);
        CHECK(method->name == "AdjustScore");
        CHECK(*method == fixture_by_hand().methods[2]);
        CHECK(schema::lookup_method(s, 65535) == nullptr);
    }

    TEST_CASE("print/parse round trip is idempotent")
    {
        const auto s = schema::parse_schema(read_file(kFixturePath));
        const std::string printed = schema::print_schema(s);
        const auto reparsed = schema::parse_schema(printed);
        CHECK(reparsed == s);
        CHECK(schema::print_schema(reparsed) == printed);
    }

    TEST_CASE("comments and blank lines are ignored")
    {
        const auto s = schema::parse_schema("# header\n\nversion 3 # trailing\n\n# done\n");
        CHECK(s.version == 3);
    }
}
