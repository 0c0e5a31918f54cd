#include "worldsync/value.hpp"

#include <cstdio>

namespace worldsync {

const char* kind_name(ValueKind kind)
{
    switch (kind) {
    case ValueKind::Null: return "null";
    case ValueKind::Bool: return "bool";
    case ValueKind::Int64: return "int64";
    case ValueKind::Float64: return "float64";
    case ValueKind::Text: return "text";
    case ValueKind::Vec3: return "vec3";
    case ValueKind::Bytes: return "bytes";
    }
    return "?";
}

std::optional<ValueKind> kind_from_name(std::string_view name)
{
    for (uint8_t tag = 0; tag < kValueKindCount; ++tag) {
        const auto kind = static_cast<ValueKind>(tag);
        if (name == kind_name(kind))
            return kind;
    }
    return std::nullopt;
}

PropertyValue default_value(ValueKind kind)
{
    switch (kind) {
    case ValueKind::Null: return std::monostate {};
    case ValueKind::Bool: return false;
    case ValueKind::Int64: return int64_t { 0 };
    case ValueKind::Float64: return 0.0;
    case ValueKind::Text: return std::string {};
    case ValueKind::Vec3: return Vec3 {};
    case ValueKind::Bytes: return Bytes {};
    }
    return std::monostate {};
}

std::string to_string(const PropertyValue& value)
{
    char buf[96];
    switch (kind_of(value)) {
    case ValueKind::Null:
        return "null";
    case ValueKind::Bool:
        return std::get<bool>(value) ? "true" : "false";
    case ValueKind::Int64:
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::get<int64_t>(value)));
        return buf;
    case ValueKind::Float64:
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(value));
        return buf;
    case ValueKind::Text:
        return "\"" + std::get<std::string>(value) + "\"";
    case ValueKind::Vec3: {
        const auto& v = std::get<Vec3>(value);
        std::snprintf(buf, sizeof(buf), "(%.17g, %.17g, %.17g)", v.x, v.y, v.z);
        return buf;
    }
    case ValueKind::Bytes:
        std::snprintf(buf, sizeof(buf), "bytes[%zu]", std::get<Bytes>(value).data.size());
        return buf;
    }
    return "?";
}

} // namespace worldsync
