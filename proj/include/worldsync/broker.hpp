#pragma once

#include "worldsync/rng.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace worldsync::broker {

struct Message {
    std::string key;
    std::vector<uint8_t> payload;
    uint64_t offset = 0;
};

struct Delivered {
    std::string topic;
    size_t partition = 0;
    uint64_t offset = 0;
    std::string key;
    std::vector<uint8_t> payload;
};

enum class DeliveryMode : uint8_t {
    Pull, // consumers fetch at their own pace
    Push, // the broker invokes consumer handlers on its tick
};

// Handler returns false to signal failure; the message is redelivered on
// the next broker tick.
using PushHandler = std::function<bool(const Delivered&)>;

// Partitioned-log broker with consumer groups. Per-partition order is total
// and immutable once appended; delivery is at-least-once until commit.
// State is mutated only from the simulation thread (broker ticks).
class Broker {
public:
    void create_topic(const std::string& topic, size_t partitions);
    bool has_topic(const std::string& topic) const { return topics_.count(topic) != 0; }
    size_t partition_count(const std::string& topic) const;

    // Appends at partition = fnv1a64(key) mod partitions.
    std::pair<size_t, uint64_t> publish(const std::string& topic, const std::string& key,
        std::vector<uint8_t> payload); // throws UnknownTopic

    // Members are sorted; partition p is owned by members[p mod |members|].
    void create_group(const std::string& group, const std::string& topic, std::vector<std::string> members,
        DeliveryMode mode = DeliveryMode::Pull);

    // Up to max_count messages from the member's partitions, partition
    // index order then offset order, starting after the member's position.
    std::vector<Delivered> pull(const std::string& group, const std::string& member, size_t max_count);

    void commit(const std::string& group, size_t partition, uint64_t offset);

    // Simulates a member crash/restart: in-memory positions fall back to
    // the committed offsets, so uncommitted messages are redelivered.
    void restart_member(const std::string& group, const std::string& member);

    void subscribe_push(const std::string& group, const std::string& member, PushHandler handler);

    // One push round: delivers pending messages of push subscriptions in
    // partition order, auto-committing on handler success. Returns the
    // number of successful deliveries.
    size_t deliver_push(size_t max_per_partition = SIZE_MAX);

    const std::vector<Message>& partition_log(const std::string& topic, size_t partition) const;
    std::optional<uint64_t> committed(const std::string& group, size_t partition) const;

private:
    struct Topic {
        std::vector<std::vector<Message>> partitions;
    };
    struct Group {
        std::string topic;
        std::vector<std::string> members; // sorted
        DeliveryMode mode = DeliveryMode::Pull;
        std::map<size_t, int64_t> committed; // partition -> last committed offset (-1 none)
        std::map<size_t, int64_t> position; // partition -> last fetched offset (-1 none)
        std::map<std::string, PushHandler> handlers;
    };

    Topic& topic(const std::string& name);
    const Topic& topic(const std::string& name) const;
    Group& group(const std::string& name);
    std::string partition_owner(const Group& g, size_t partition) const;

    std::map<std::string, Topic> topics_;
    std::map<std::string, Group> groups_;
};

} // namespace worldsync::broker
