#pragma once

#include "worldsync/value.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace worldsync::schema {

struct PropertyDef {
    std::string key;
    uint16_t prop_id = 0;
    ValueKind kind = ValueKind::Null;
    bool replicated = false;

    friend bool operator==(const PropertyDef&, const PropertyDef&) = default;
};

struct ClassDef {
    std::string name;
    uint16_t class_id = 0;
    // Declaration order is the canonical serialization order.
    std::vector<PropertyDef> properties;

    const PropertyDef* find_property(uint16_t prop_id) const;
    const PropertyDef* find_property(std::string_view key) const;

    friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

enum class MethodMode : uint8_t {
    Unary = 0,
    ServerStream = 1,
};

struct MethodDef {
    std::string name;
    uint16_t method_id = 0;
    std::vector<ValueKind> params;
    std::optional<ValueKind> returns;
    MethodMode mode = MethodMode::Unary;

    friend bool operator==(const MethodDef&, const MethodDef&) = default;
};

struct Schema {
    uint32_t version = 0;
    std::vector<ClassDef> classes;
    std::vector<MethodDef> methods;

    friend bool operator==(const Schema&, const Schema&) = default;
};

// Throws Error{syntax_error | duplicate_id | unknown_kind}. Parsing is total
// over valid inputs and preserves declaration order.
Schema parse_schema(std::string_view text);

// Invariant violations as data; an empty list means the schema is valid.
std::vector<std::string> validate_schema(const Schema& schema);

// Exact-match lookups; nullptr when absent.
const MethodDef* lookup_method(const Schema& schema, uint16_t method_id);
const ClassDef* lookup_class(const Schema& schema, uint16_t class_id);
const ClassDef* lookup_class(const Schema& schema, std::string_view name);

// Canonical printer. parse_schema(print_schema(s)) is structurally equal
// to s for every valid schema.
std::string print_schema(const Schema& schema);

Schema load_schema_file(const std::string& path);

} // namespace worldsync::schema
