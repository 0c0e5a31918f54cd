#include "worldsync/broker.hpp"

#include "worldsync/error.hpp"

#include <algorithm>

namespace worldsync::broker {

void Broker::create_topic(const std::string& topic, size_t partitions)
{
    if (partitions == 0)
        raise(Errc::invalid_argument, "topic needs at least one partition");
    if (topics_.count(topic))
        raise(Errc::invalid_argument, "topic '" + topic + "' already exists");
    topics_[topic].partitions.resize(partitions);
}

Broker::Topic& Broker::topic(const std::string& name)
{
    const auto it = topics_.find(name);
    if (it == topics_.end())
        raise(Errc::unknown_topic, "'" + name + "'");
    return it->second;
}

const Broker::Topic& Broker::topic(const std::string& name) const
{
    const auto it = topics_.find(name);
    if (it == topics_.end())
        raise(Errc::unknown_topic, "'" + name + "'");
    return it->second;
}

Broker::Group& Broker::group(const std::string& name)
{
    const auto it = groups_.find(name);
    if (it == groups_.end())
        raise(Errc::unknown_group, "'" + name + "'");
    return it->second;
}

size_t Broker::partition_count(const std::string& name) const
{
    return topic(name).partitions.size();
}

std::pair<size_t, uint64_t> Broker::publish(const std::string& name, const std::string& key,
    std::vector<uint8_t> payload)
{
    Topic& t = topic(name);
    const size_t partition = fnv1a64(key) % t.partitions.size();
    auto& log = t.partitions[partition];
    const uint64_t offset = log.size();
    log.push_back(Message { key, std::move(payload), offset });
    return { partition, offset };
}

void Broker::create_group(const std::string& name, const std::string& topic_name,
    std::vector<std::string> members, DeliveryMode mode)
{
    topic(topic_name); // must exist
    if (groups_.count(name))
        raise(Errc::invalid_argument, "group '" + name + "' already exists");
    if (members.empty())
        raise(Errc::invalid_argument, "group needs at least one member");
    std::sort(members.begin(), members.end());
    Group g;
    g.topic = topic_name;
    g.members = std::move(members);
    g.mode = mode;
    groups_.emplace(name, std::move(g));
}

std::string Broker::partition_owner(const Group& g, size_t partition) const
{
    return g.members[partition % g.members.size()];
}

std::vector<Delivered> Broker::pull(const std::string& group_name, const std::string& member, size_t max_count)
{
    Group& g = group(group_name);
    const Topic& t = topic(g.topic);

    std::vector<Delivered> out;
    for (size_t partition = 0; partition < t.partitions.size() && out.size() < max_count; ++partition) {
        if (partition_owner(g, partition) != member)
            continue;
        int64_t& position = g.position.try_emplace(partition, -1).first->second;
        const auto& log = t.partitions[partition];
        while (out.size() < max_count && position + 1 < static_cast<int64_t>(log.size())) {
            const Message& message = log[static_cast<size_t>(position + 1)];
            out.push_back(Delivered { g.topic, partition, message.offset, message.key, message.payload });
            ++position;
        }
    }
    return out;
}

void Broker::commit(const std::string& group_name, size_t partition, uint64_t offset)
{
    Group& g = group(group_name);
    int64_t& committed = g.committed.try_emplace(partition, -1).first->second;
    committed = std::max(committed, static_cast<int64_t>(offset));
    int64_t& position = g.position.try_emplace(partition, -1).first->second;
    position = std::max(position, committed);
}

void Broker::restart_member(const std::string& group_name, const std::string& member)
{
    Group& g = group(group_name);
    const Topic& t = topic(g.topic);
    for (size_t partition = 0; partition < t.partitions.size(); ++partition) {
        if (partition_owner(g, partition) != member)
            continue;
        g.position[partition] = g.committed.try_emplace(partition, -1).first->second;
    }
}

void Broker::subscribe_push(const std::string& group_name, const std::string& member, PushHandler handler)
{
    Group& g = group(group_name);
    if (g.mode != DeliveryMode::Push)
        raise(Errc::invalid_argument, "group '" + group_name + "' is not in push mode");
    g.handlers[member] = std::move(handler);
}

size_t Broker::deliver_push(size_t max_per_partition)
{
    size_t delivered = 0;
    for (auto& [group_name, g] : groups_) {
        if (g.mode != DeliveryMode::Push)
            continue;
        const Topic& t = topic(g.topic);
        for (size_t partition = 0; partition < t.partitions.size(); ++partition) {
            const std::string owner = partition_owner(g, partition);
            const auto handler_it = g.handlers.find(owner);
            if (handler_it == g.handlers.end())
                continue;
            int64_t& position = g.position.try_emplace(partition, -1).first->second;
            const auto& log = t.partitions[partition];
            size_t sent = 0;
            while (sent < max_per_partition && position + 1 < static_cast<int64_t>(log.size())) {
                const Message& message = log[static_cast<size_t>(position + 1)];
                const Delivered item { g.topic, partition, message.offset, message.key, message.payload };
                if (!handler_it->second(item))
                    break; // failed: redeliver next tick
                ++position;
                commit(group_name, partition, message.offset);
                ++delivered;
                ++sent;
            }
        }
    }
    return delivered;
}

const std::vector<Message>& Broker::partition_log(const std::string& name, size_t partition) const
{
    const Topic& t = topic(name);
    if (partition >= t.partitions.size())
        raise(Errc::invalid_argument, "partition index out of range");
    return t.partitions[partition];
}

std::optional<uint64_t> Broker::committed(const std::string& group_name, size_t partition) const
{
    const auto it = groups_.find(group_name);
    if (it == groups_.end())
        raise(Errc::unknown_group, "'" + group_name + "'");
    const auto cit = it->second.committed.find(partition);
    if (cit == it->second.committed.end() || cit->second < 0)
        return std::nullopt;
    return static_cast<uint64_t>(cit->second);
}

} // namespace worldsync::broker
