#include "worldsync/channel.hpp"

#include "worldsync/error.hpp"

namespace worldsync::net {

Connection::Connection(sim::Sim& sim, Network& network, Address self, Address peer, ChannelConfig config)
    : sim_(sim)
    , network_(network)
    , self_(self)
    , peer_(peer)
    , config_(config)
{
}

void Connection::send_message(uint8_t channel, bool reliable, std::vector<uint8_t> message)
{
    if (closed_)
        raise(Errc::channel_closed, "send on closed connection");

    SendState& send = send_[channel];
    const auto pieces = wire::fragment(message, config_.mtu);
    for (const auto& piece : pieces) {
        wire::Frame frame;
        frame.channel = channel;
        frame.flags = piece.flags;
        frame.payload = piece.payload;
        frame.sequence = send.next_seq++;
        if (reliable) {
            frame.flags |= wire::flag::Reliable;
            send.unacked[frame.sequence] = frame;
            send.retries[frame.sequence] = 0;
            schedule_retry(channel, frame.sequence);
        }
        transmit(channel, frame);
    }
}

void Connection::transmit(uint8_t channel, const wire::Frame& frame)
{
    wire::Frame out = frame;
    stamp_acks(channel, out);
    network_.send(self_, peer_, std::move(out));
}

void Connection::stamp_acks(uint8_t channel, wire::Frame& frame)
{
    const auto it = recv_.find(channel);
    if (it == recv_.end() || !it->second.any_received)
        return;
    frame.flags |= wire::flag::AckPresent;
    frame.ack = it->second.latest_received;
    frame.ack_bits = it->second.history;
}

void Connection::schedule_retry(uint8_t channel, uint32_t seq)
{
    sim_.schedule(sim_.now_ms() + config_.rto_ms, [this, channel, seq]() {
        if (closed_)
            return;
        SendState& send = send_[channel];
        const auto it = send.unacked.find(seq);
        if (it == send.unacked.end())
            return; // acked in the meantime
        int& retries = send.retries[seq];
        if (retries >= config_.max_retries) {
            ++give_ups_;
            send.unacked.erase(it);
            send.retries.erase(seq);
            return;
        }
        ++retries;
        ++retransmits_;
        transmit(channel, it->second);
        schedule_retry(channel, seq);
    });
}

void Connection::handle_frame(const wire::Frame& frame)
{
    if (closed_)
        return;
    if (frame.has_flag(wire::flag::AckPresent))
        process_ack_fields(frame.channel, frame);

    if (frame.payload.empty() && !frame.has_flag(wire::flag::Fragment) && !frame.has_flag(wire::flag::LastFragment)) {
        if (!frame.has_flag(wire::flag::Reliable))
            return; // pure ack frame
    }

    RecvState& recv = recv_[frame.channel];
    if (frame.has_flag(wire::flag::Reliable)) {
        note_received(recv, frame.sequence);
        send_ack_frame(frame.channel);
        if (frame.sequence < recv.next_expected || recv.held.count(frame.sequence))
            return; // duplicate, ack already refreshed
        recv.held[frame.sequence] = frame;
        drain_in_order(frame.channel, recv);
    } else {
        if (auto message = recv.unreliable_assembler.feed(frame))
            emit(frame.channel, false, std::move(*message));
    }
}

// Standard sliding ack window: latest received sequence plus a 32-bit
// history of its predecessors.
void Connection::note_received(RecvState& recv, uint32_t seq)
{
    if (!recv.any_received) {
        recv.any_received = true;
        recv.latest_received = seq;
        recv.history = 0;
        return;
    }
    if (seq > recv.latest_received) {
        const uint32_t shift = seq - recv.latest_received;
        recv.history = shift >= 32 ? 0 : recv.history << shift;
        if (shift <= 32 && shift >= 1)
            recv.history |= 1u << (shift - 1);
        recv.latest_received = seq;
    } else if (seq < recv.latest_received) {
        const uint32_t back = recv.latest_received - seq - 1;
        if (back < 32)
            recv.history |= 1u << back;
    }
}

void Connection::process_ack_fields(uint8_t channel, const wire::Frame& frame)
{
    SendState& send = send_[channel];
    auto settle = [&](uint32_t seq) {
        send.unacked.erase(seq);
        send.retries.erase(seq);
    };
    settle(frame.ack);
    for (uint32_t bit = 0; bit < 32; ++bit) {
        if (frame.ack_bits & (1u << bit)) {
            if (frame.ack >= bit + 1)
                settle(frame.ack - 1 - bit);
        }
    }
}

void Connection::send_ack_frame(uint8_t channel)
{
    wire::Frame ack;
    ack.channel = channel;
    stamp_acks(channel, ack);
    network_.send(self_, peer_, std::move(ack));
}

void Connection::drain_in_order(uint8_t channel, RecvState& recv)
{
    auto it = recv.held.find(recv.next_expected);
    while (it != recv.held.end()) {
        const wire::Frame& frame = it->second;
        const bool is_fragment = frame.has_flag(wire::flag::Fragment) || frame.has_flag(wire::flag::LastFragment);
        if (!is_fragment) {
            emit(channel, true, frame.payload);
        } else {
            recv.partial.insert(recv.partial.end(), frame.payload.begin(), frame.payload.end());
            if (frame.has_flag(wire::flag::LastFragment))
                emit(channel, true, std::exchange(recv.partial, {}));
        }
        recv.held.erase(it);
        ++recv.next_expected;
        it = recv.held.find(recv.next_expected);
    }
}

void Connection::emit(uint8_t channel, bool reliable, std::vector<uint8_t> bytes)
{
    if (on_message_)
        on_message_(InboundMessage { channel, reliable, std::move(bytes) });
}

} // namespace worldsync::net
