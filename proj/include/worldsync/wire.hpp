#pragma once

#include "worldsync/error.hpp"
#include "worldsync/value.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace worldsync::wire {

inline constexpr uint8_t kMagic0 = 0x57; // 'W'
inline constexpr uint8_t kMagic1 = 0x53; // 'S'
inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr size_t kHeaderSize = 19;
inline constexpr size_t kMaxPayload = 65535;

namespace flag {
    inline constexpr uint8_t Reliable = 0x01;
    inline constexpr uint8_t AckPresent = 0x02;
    inline constexpr uint8_t Fragment = 0x04;
    inline constexpr uint8_t LastFragment = 0x08;
} // namespace flag

// First payload byte of every message.
enum class BodyType : uint8_t {
    ReplicationDelta = 0x01,
    Snapshot = 0x02,
    RpcRequest = 0x03,
    RpcResponse = 0x04,
    ClockPing = 0x05,
    ClockPong = 0x06,
    Join = 0x07,
    JoinAck = 0x08,
    StreamData = 0x09,
};

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v); // IEEE-754 big-endian
    void bytes(std::span<const uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    size_t size() const { return buf_.size(); }
    std::vector<uint8_t> take() { return std::move(buf_); }
    const std::vector<uint8_t>& view() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data)
        : data_(data)
    {
    }

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64();
    std::span<const uint8_t> bytes(size_t n);

    size_t remaining() const { return data_.size() - pos_; }
    size_t consumed() const { return pos_; }

private:
    void need(size_t n) const;

    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

// Value codec: tag byte then fixed or length-prefixed body.
void encode_value(const PropertyValue& value, ByteWriter& out); // throws TooLong
std::vector<uint8_t> encode_value(const PropertyValue& value);
PropertyValue decode_value(ByteReader& in); // throws Truncated, UnknownTag
std::pair<PropertyValue, size_t> decode_value(std::span<const uint8_t> data);

struct Frame {
    uint8_t flags = 0;
    uint8_t channel = 0;
    uint32_t sequence = 0;
    uint32_t ack = 0;
    uint32_t ack_bits = 0;
    std::vector<uint8_t> payload;

    bool has_flag(uint8_t f) const { return (flags & f) != 0; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

std::vector<uint8_t> encode_frame(const Frame& frame); // throws TooLong
Frame decode_frame(std::span<const uint8_t> data); // throws BadMagic, BadVersion, Truncated

inline BodyType body_type(std::span<const uint8_t> payload)
{
    if (payload.empty())
        raise(Errc::truncated, "empty message body");
    const uint8_t tag = payload[0];
    if (tag < 0x01 || tag > 0x09)
        raise(Errc::unknown_body_type, "body type " + std::to_string(tag));
    return static_cast<BodyType>(tag);
}

struct FragmentPiece {
    std::vector<uint8_t> payload;
    uint8_t flags = 0; // Fragment / LastFragment as appropriate
};

// Splits a payload into frame-sized pieces. A payload that fits in one
// frame comes back as a single piece with no fragment flags.
std::vector<FragmentPiece> fragment(std::span<const uint8_t> payload, size_t mtu); // throws MtuTooSmall

// Rebuilds one message whose fragments start at a known base sequence.
// Fragments may arrive in any order; duplicates are idempotent.
class Reassembler {
public:
    explicit Reassembler(uint32_t base_sequence)
        : base_(base_sequence)
    {
    }

    // Returns the full payload once every fragment is present, pending
    // (nullopt) otherwise. Throws InconsistentFragmentSet on conflicting
    // payloads or conflicting last-fragment positions.
    std::optional<std::vector<uint8_t>> feed(const Frame& frame);

    bool complete() const { return done_; }

private:
    std::optional<std::vector<uint8_t>> try_finish();

    uint32_t base_;
    std::map<uint32_t, std::vector<uint8_t>> pieces_;
    std::optional<uint32_t> last_seq_;
    bool done_ = false;
};

// Message boundary recovery for unreliable flows, where fragments of
// successive messages share one sequence space and any frame can be lost.
// A message spans (previous delivered LAST, this LAST]; it completes only
// when every sequence in that span has arrived.
class FlowAssembler {
public:
    explicit FlowAssembler(uint32_t initial_sequence = 0)
        : floor_(static_cast<int64_t>(initial_sequence) - 1)
    {
    }

    std::optional<std::vector<uint8_t>> feed(const Frame& frame);

private:
    int64_t floor_; // highest sequence already consumed by a delivered message
    std::map<uint32_t, std::vector<uint8_t>> pieces_;
    std::set<uint32_t> last_marks_;
    std::set<uint32_t> seen_unfragmented_;
};

} // namespace worldsync::wire
