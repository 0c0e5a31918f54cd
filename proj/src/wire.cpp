#include "worldsync/wire.hpp"

#include <bit>
#include <cstring>

namespace worldsync::wire {

void ByteWriter::u16(uint16_t v)
{
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v)
{
    for (int shift = 24; shift >= 0; shift -= 8)
        buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::u64(uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8)
        buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::f64(double v)
{
    u64(std::bit_cast<uint64_t>(v));
}

void ByteReader::need(size_t n) const
{
    if (remaining() < n)
        raise(Errc::truncated, "need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
}

uint8_t ByteReader::u8()
{
    need(1);
    return data_[pos_++];
}

uint16_t ByteReader::u16()
{
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

uint32_t ByteReader::u32()
{
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
}

uint64_t ByteReader::u64()
{
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = v << 8 | data_[pos_ + i];
    pos_ += 8;
    return v;
}

double ByteReader::f64()
{
    return std::bit_cast<double>(u64());
}

std::span<const uint8_t> ByteReader::bytes(size_t n)
{
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

void encode_value(const PropertyValue& value, ByteWriter& out)
{
    out.u8(static_cast<uint8_t>(kind_of(value)));
    switch (kind_of(value)) {
    case ValueKind::Null:
        break;
    case ValueKind::Bool:
        out.u8(std::get<bool>(value) ? 1 : 0);
        break;
    case ValueKind::Int64:
        out.i64(std::get<int64_t>(value));
        break;
    case ValueKind::Float64:
        out.f64(std::get<double>(value));
        break;
    case ValueKind::Text: {
        const auto& text = std::get<std::string>(value);
        if (text.size() > kMaxPayload)
            raise(Errc::too_long, "text of " + std::to_string(text.size()) + " bytes");
        out.u16(static_cast<uint16_t>(text.size()));
        out.bytes({ reinterpret_cast<const uint8_t*>(text.data()), text.size() });
        break;
    }
    case ValueKind::Vec3: {
        const auto& v = std::get<Vec3>(value);
        out.f64(v.x);
        out.f64(v.y);
        out.f64(v.z);
        break;
    }
    case ValueKind::Bytes: {
        const auto& blob = std::get<Bytes>(value);
        if (blob.data.size() > kMaxPayload)
            raise(Errc::too_long, "bytes of " + std::to_string(blob.data.size()));
        out.u16(static_cast<uint16_t>(blob.data.size()));
        out.bytes(blob.data);
        break;
    }
    }
}

std::vector<uint8_t> encode_value(const PropertyValue& value)
{
    ByteWriter out;
    encode_value(value, out);
    return out.take();
}

PropertyValue decode_value(ByteReader& in)
{
    const uint8_t tag = in.u8();
    if (!valid_kind(tag))
        raise(Errc::unknown_tag, "value tag " + std::to_string(tag));
    switch (static_cast<ValueKind>(tag)) {
    case ValueKind::Null:
        return std::monostate {};
    case ValueKind::Bool:
        return in.u8() != 0;
    case ValueKind::Int64:
        return in.i64();
    case ValueKind::Float64:
        return in.f64();
    case ValueKind::Text: {
        const size_t len = in.u16();
        const auto raw = in.bytes(len);
        return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
    }
    case ValueKind::Vec3: {
        Vec3 v;
        v.x = in.f64();
        v.y = in.f64();
        v.z = in.f64();
        return v;
    }
    case ValueKind::Bytes: {
        const size_t len = in.u16();
        const auto raw = in.bytes(len);
        return Bytes { { raw.begin(), raw.end() } };
    }
    }
    raise(Errc::unknown_tag, "value tag " + std::to_string(tag));
}

std::pair<PropertyValue, size_t> decode_value(std::span<const uint8_t> data)
{
    ByteReader in(data);
    PropertyValue value = decode_value(in);
    return { std::move(value), in.consumed() };
}

std::vector<uint8_t> encode_frame(const Frame& frame)
{
    if (frame.payload.size() > kMaxPayload)
        raise(Errc::too_long, "payload of " + std::to_string(frame.payload.size()) + " bytes");
    ByteWriter out;
    out.u8(kMagic0);
    out.u8(kMagic1);
    out.u8(kProtocolVersion);
    out.u8(frame.flags);
    out.u8(frame.channel);
    out.u32(frame.sequence);
    out.u32(frame.ack);
    out.u32(frame.ack_bits);
    out.u16(static_cast<uint16_t>(frame.payload.size()));
    out.bytes(frame.payload);
    return out.take();
}

Frame decode_frame(std::span<const uint8_t> data)
{
    ByteReader in(data);
    if (in.u8() != kMagic0 || in.u8() != kMagic1)
        raise(Errc::bad_magic, "frame does not start with WS");
    if (const uint8_t version = in.u8(); version != kProtocolVersion)
        raise(Errc::bad_version, "frame version " + std::to_string(version));
    Frame frame;
    frame.flags = in.u8();
    frame.channel = in.u8();
    frame.sequence = in.u32();
    frame.ack = in.u32();
    frame.ack_bits = in.u32();
    const size_t len = in.u16();
    const auto payload = in.bytes(len);
    frame.payload.assign(payload.begin(), payload.end());
    return frame;
}

std::vector<FragmentPiece> fragment(std::span<const uint8_t> payload, size_t mtu)
{
    if (mtu <= kHeaderSize)
        raise(Errc::mtu_too_small, "mtu " + std::to_string(mtu) + " leaves no payload capacity");
    const size_t capacity = mtu - kHeaderSize;

    std::vector<FragmentPiece> pieces;
    if (payload.size() <= capacity) {
        pieces.push_back({ { payload.begin(), payload.end() }, 0 });
        return pieces;
    }
    size_t offset = 0;
    while (offset < payload.size()) {
        const size_t take = std::min(capacity, payload.size() - offset);
        FragmentPiece piece;
        piece.payload.assign(payload.begin() + offset, payload.begin() + offset + take);
        piece.flags = flag::Fragment;
        offset += take;
        if (offset == payload.size())
            piece.flags |= flag::LastFragment;
        pieces.push_back(std::move(piece));
    }
    return pieces;
}

std::optional<std::vector<uint8_t>> Reassembler::feed(const Frame& frame)
{
    if (done_)
        return std::nullopt;
    if (frame.sequence < base_)
        raise(Errc::inconsistent_fragment_set, "fragment sequence below base");

    if (!frame.has_flag(flag::Fragment) && !frame.has_flag(flag::LastFragment)) {
        if (frame.sequence != base_ || !pieces_.empty())
            raise(Errc::inconsistent_fragment_set, "unfragmented frame inside fragment set");
        done_ = true;
        return frame.payload;
    }

    if (frame.has_flag(flag::LastFragment)) {
        if (last_seq_ && *last_seq_ != frame.sequence)
            raise(Errc::inconsistent_fragment_set, "conflicting last-fragment positions");
        last_seq_ = frame.sequence;
    }
    if (last_seq_ && frame.sequence > *last_seq_)
        raise(Errc::inconsistent_fragment_set, "fragment beyond last-fragment position");

    if (auto it = pieces_.find(frame.sequence); it != pieces_.end()) {
        if (it->second != frame.payload)
            raise(Errc::inconsistent_fragment_set, "conflicting payloads at one sequence");
        return std::nullopt; // duplicate
    }
    pieces_[frame.sequence] = frame.payload;
    return try_finish();
}

std::optional<std::vector<uint8_t>> Reassembler::try_finish()
{
    if (!last_seq_)
        return std::nullopt;
    const size_t expected = static_cast<size_t>(*last_seq_ - base_) + 1;
    if (pieces_.size() != expected)
        return std::nullopt;
    std::vector<uint8_t> out;
    for (const auto& [seq, piece] : pieces_)
        out.insert(out.end(), piece.begin(), piece.end());
    done_ = true;
    return out;
}

std::optional<std::vector<uint8_t>> FlowAssembler::feed(const Frame& frame)
{
    const int64_t seq = frame.sequence;
    if (seq <= floor_)
        return std::nullopt; // stale duplicate of a consumed message

    if (!frame.has_flag(flag::Fragment) && !frame.has_flag(flag::LastFragment)) {
        if (!seen_unfragmented_.insert(frame.sequence).second)
            return std::nullopt;
        if (seen_unfragmented_.size() > 4096)
            seen_unfragmented_.erase(seen_unfragmented_.begin());
        return frame.payload;
    }

    pieces_.emplace(frame.sequence, frame.payload); // duplicates keep the first copy
    if (frame.has_flag(flag::LastFragment))
        last_marks_.insert(frame.sequence);

    // A message ends at a LAST mark and starts just after the nearest older
    // boundary (the floor or a previous LAST mark). Deliver the first span
    // that is fully present; anything older is abandoned.
    for (const uint32_t last : last_marks_) {
        int64_t boundary = floor_;
        for (const uint32_t mark : last_marks_) {
            if (mark >= last)
                break;
            boundary = std::max<int64_t>(boundary, mark);
        }
        bool all_present = true;
        std::vector<uint8_t> out;
        for (int64_t s = boundary + 1; s <= last; ++s) {
            const auto it = pieces_.find(static_cast<uint32_t>(s));
            if (it == pieces_.end()) {
                all_present = false;
                break;
            }
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
        if (!all_present)
            continue;
        floor_ = last;
        pieces_.erase(pieces_.begin(), pieces_.upper_bound(last));
        last_marks_.erase(last_marks_.begin(), last_marks_.upper_bound(last));
        return out;
    }
    return std::nullopt;
}

} // namespace worldsync::wire
