#pragma once

#include "worldsync/net.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace worldsync::net {

struct ChannelConfig {
    // Retransmission timeout; callers usually set 3x their one-way latency
    // estimate. Retries beyond max_retries abandon the message (GiveUp).
    double rto_ms = 30.0;
    int max_retries = 20;
    size_t mtu = 1200;
};

struct InboundMessage {
    uint8_t channel = 0;
    bool reliable = false;
    std::vector<uint8_t> bytes;
};

// Point-to-point frame machinery between two addresses: per-channel
// sequencing, fragmentation, and for reliable sends an ack/retransmit loop
// over the 32-bit ack bitfield. Reliable messages come out exactly once and
// in order on the far side for any loss rate below 1.
class Connection {
public:
    Connection(sim::Sim& sim, Network& network, Address self, Address peer, ChannelConfig config = {});

    void send_message(uint8_t channel, bool reliable, std::vector<uint8_t> message); // throws ChannelClosed

    // Feed a frame that arrived on self's endpoint from this connection's
    // peer. Delivered messages surface through the message handler.
    void handle_frame(const wire::Frame& frame);

    void set_message_handler(std::function<void(const InboundMessage&)> handler) { on_message_ = std::move(handler); }

    void close() { closed_ = true; }
    bool closed() const { return closed_; }

    // The peer address frames are sent to (load-balancer scenarios retarget
    // the peer when a flow is re-routed).
    void set_peer(Address peer) { peer_ = peer; }
    Address peer() const { return peer_; }
    Address self() const { return self_; }
    void set_self(Address self) { self_ = self; }

    uint64_t give_up_count() const { return give_ups_; }
    uint64_t retransmit_count() const { return retransmits_; }

private:
    struct SendState {
        uint32_t next_seq = 0;
        std::map<uint32_t, wire::Frame> unacked; // reliable frames awaiting ack
        std::map<uint32_t, int> retries;
    };
    struct RecvState {
        uint32_t next_expected = 0; // reliable in-order cursor
        std::map<uint32_t, wire::Frame> held; // out-of-order reliable frames
        std::vector<uint8_t> partial; // fragment run currently being accumulated
        wire::FlowAssembler unreliable_assembler;
        bool any_received = false;
        uint32_t latest_received = 0;
        uint32_t history = 0; // bit i set => (latest_received - 1 - i) received
    };

    void transmit(uint8_t channel, const wire::Frame& frame);
    void schedule_retry(uint8_t channel, uint32_t seq);
    void stamp_acks(uint8_t channel, wire::Frame& frame);
    void note_received(RecvState& recv, uint32_t seq);
    void process_ack_fields(uint8_t channel, const wire::Frame& frame);
    void drain_in_order(uint8_t channel, RecvState& recv);
    void emit(uint8_t channel, bool reliable, std::vector<uint8_t> bytes);
    void send_ack_frame(uint8_t channel);

    sim::Sim& sim_;
    Network& network_;
    Address self_;
    Address peer_;
    ChannelConfig config_;
    std::map<uint8_t, SendState> send_;
    std::map<uint8_t, RecvState> recv_;
    std::function<void(const InboundMessage&)> on_message_;
    bool closed_ = false;
    uint64_t give_ups_ = 0;
    uint64_t retransmits_ = 0;
};

} // namespace worldsync::net
