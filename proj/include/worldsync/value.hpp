#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace worldsync {

// Wire tag order. The variant alternatives below are declared in exactly
// this order so that PropertyValue::index() is the wire tag.
enum class ValueKind : uint8_t {
    Null = 0,
    Bool = 1,
    Int64 = 2,
    Float64 = 3,
    Text = 4,
    Vec3 = 5,
    Bytes = 6,
};

inline constexpr uint8_t kValueKindCount = 7;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Distinct from Text on the wire, hence a strong type.
struct Bytes {
    std::vector<uint8_t> data;

    friend bool operator==(const Bytes&, const Bytes&) = default;
};

using PropertyValue = std::variant<std::monostate, bool, int64_t, double, std::string, Vec3, Bytes>;

inline ValueKind kind_of(const PropertyValue& value)
{
    return static_cast<ValueKind>(value.index());
}

inline bool valid_kind(uint8_t tag) { return tag < kValueKindCount; }

const char* kind_name(ValueKind kind);
std::optional<ValueKind> kind_from_name(std::string_view name);

// The zero value for a kind: what a freshly instantiated property holds
// before any replicated write reaches it.
PropertyValue default_value(ValueKind kind);

// Human-readable rendering used by the CLI and reports.
std::string to_string(const PropertyValue& value);

} // namespace worldsync
