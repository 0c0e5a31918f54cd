#pragma once

#include "worldsync/schema.hpp"
#include "worldsync/wire.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace worldsync::repl {

using ClientId = uint32_t;
using ObjectId = uint32_t;

struct ReplicatedObject {
    ObjectId object_id = 0;
    uint16_t class_id = 0;
    std::optional<ClientId> owner; // nullopt = server-owned
    std::map<uint16_t, PropertyValue> properties;

    friend bool operator==(const ReplicatedObject&, const ReplicatedObject&) = default;
};

struct WorldState {
    std::map<ObjectId, ReplicatedObject> objects;
    uint64_t tick = 0;
};

// Per-tick change tracking: only what is listed here may appear in the
// next delta.
struct DirtySet {
    std::map<ObjectId, std::set<uint16_t>> changed;
    std::vector<ObjectId> created;
    std::vector<ObjectId> destroyed;

    bool empty() const { return changed.empty() && created.empty() && destroyed.empty(); }
    void clear()
    {
        changed.clear();
        created.clear();
        destroyed.clear();
    }
};

struct RelevanceRule {
    enum class Mode { All, Radius } mode = Mode::All;
    double radius = 0.0;

    static RelevanceRule all() { return {}; }
    static RelevanceRule within(double r) { return { Mode::Radius, r }; }
};

struct ClientView {
    ClientId id = 0;
    Vec3 viewpoint {};
};

// The property named "position" (kind vec3) is the object's spatial anchor
// for radius relevance.
inline constexpr const char* kPositionKey = "position";

// All -> true; Radius -> distance(position, viewpoint) <= r, boundary
// inclusive. Throws MissingPosition under Radius for classes without a
// position property.
bool relevant(const ReplicatedObject& object, const schema::Schema& schema, const Vec3& viewpoint,
    const RelevanceRule& rule);

struct ObjectUpdate {
    ObjectId object_id = 0;
    uint16_t class_id = 0;
    std::vector<std::pair<uint16_t, PropertyValue>> props;

    friend bool operator==(const ObjectUpdate&, const ObjectUpdate&) = default;
};

// Delta (0x01) and snapshot (0x02) share one layout; a snapshot always
// carries the full replicated property set of every relevant object.
struct DeltaMessage {
    uint64_t tick = 0;
    std::vector<ObjectUpdate> objects;

    friend bool operator==(const DeltaMessage&, const DeltaMessage&) = default;
};

struct SnapshotMessage {
    uint64_t tick = 0;
    std::vector<ObjectUpdate> objects;

    friend bool operator==(const SnapshotMessage&, const SnapshotMessage&) = default;
};

std::vector<uint8_t> encode_delta(const DeltaMessage& delta);
std::vector<uint8_t> encode_snapshot(const SnapshotMessage& snapshot);
DeltaMessage decode_delta(std::span<const uint8_t> body);
SnapshotMessage decode_snapshot(std::span<const uint8_t> body);

// Single-object encoding, also the statestore value format.
std::vector<uint8_t> encode_object(const ReplicatedObject& object, const schema::Schema& schema);
ReplicatedObject decode_object(std::span<const uint8_t> data);

enum class SetOutcome {
    Replicated, // write applied and marked dirty
    NotReplicated, // write applied, dirty tracking skipped
};

// Authoritative world: owned by the server's single-threaded tick loop.
// Writers outside that loop must enqueue intents and let the loop apply
// them; the state is never mutated from two activities at once.
class ServerWorld {
public:
    explicit ServerWorld(const schema::Schema& schema)
        : schema_(&schema)
    {
    }

    ObjectId create_object(uint16_t class_id, std::optional<ClientId> owner,
        std::optional<ObjectId> object_id = std::nullopt);
    void destroy_object(ObjectId object_id);

    SetOutcome set_property(ObjectId object_id, uint16_t prop_id, PropertyValue value);

    // Optional value-equality suppression (off by default): identical
    // writes stop marking the property dirty.
    void set_value_suppression(bool enabled) { suppress_unchanged_ = enabled; }

    // Advances the tick, emits one coalesced delta per client (latest value
    // per dirty property), clears the dirty set.
    std::map<ClientId, DeltaMessage> collect_deltas(std::span<const ClientView> clients, const RelevanceRule& rule);

    SnapshotMessage full_snapshot(const ClientView& view, const RelevanceRule& rule) const;

    const WorldState& state() const { return state_; }
    const DirtySet& dirty() const { return dirty_; }
    const schema::Schema& bound_schema() const { return *schema_; }

    // Replicated properties only, objects and properties in id order; the
    // state-equality oracle format.
    std::vector<uint8_t> canonical_bytes() const;

private:
    ObjectUpdate update_for(const ReplicatedObject& object, const std::set<uint16_t>* only_props) const;

    const schema::Schema* schema_;
    WorldState state_;
    DirtySet dirty_;
    ObjectId next_object_id_ = 1;
    bool suppress_unchanged_ = false;
};

// Client-side mirror. Unknown objects in a delta are instantiated with
// class defaults and then patched; stale ticks are discarded.
class ClientReplica {
public:
    explicit ClientReplica(const schema::Schema& schema)
        : schema_(&schema)
    {
    }

    // Set from the JoinAck handshake; a mismatch poisons every apply.
    void set_server_schema_version(uint32_t version) { server_version_ = version; }

    bool apply_delta(const DeltaMessage& delta); // false = stale, discarded
    void apply_snapshot(const SnapshotMessage& snapshot);

    const std::map<ObjectId, ReplicatedObject>& objects() const { return objects_; }
    uint64_t last_tick() const { return last_tick_; }
    std::vector<uint8_t> canonical_bytes() const;

private:
    void check_version() const;
    void apply_update(const ObjectUpdate& update);

    const schema::Schema* schema_;
    std::optional<uint32_t> server_version_;
    std::map<ObjectId, ReplicatedObject> objects_;
    uint64_t last_tick_ = 0;
};

// Canonical form shared by ServerWorld and ClientReplica oracles.
std::vector<uint8_t> canonical_world_bytes(const std::map<ObjectId, ReplicatedObject>& objects,
    const schema::Schema& schema);

} // namespace worldsync::repl
