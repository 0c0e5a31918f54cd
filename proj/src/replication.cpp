#include "worldsync/replication.hpp"

#include "worldsync/error.hpp"

#include <algorithm>

namespace worldsync::repl {

bool relevant(const ReplicatedObject& object, const schema::Schema& schema, const Vec3& viewpoint,
    const RelevanceRule& rule)
{
    if (rule.mode == RelevanceRule::Mode::All)
        return true;

    const schema::ClassDef* cls = schema::lookup_class(schema, object.class_id);
    const schema::PropertyDef* def = cls ? cls->find_property(kPositionKey) : nullptr;
    if (!def || def->kind != ValueKind::Vec3)
        raise(Errc::missing_position, "class " + std::to_string(object.class_id) + " declares no vec3 position");
    const auto it = object.properties.find(def->prop_id);
    if (it == object.properties.end() || kind_of(it->second) != ValueKind::Vec3)
        raise(Errc::missing_position, "object " + std::to_string(object.object_id) + " holds no position value");
    return distance(std::get<Vec3>(it->second), viewpoint) <= rule.radius;
}

namespace {

    void encode_update(const ObjectUpdate& update, wire::ByteWriter& out)
    {
        out.u32(update.object_id);
        out.u16(update.class_id);
        out.u16(static_cast<uint16_t>(update.props.size()));
        for (const auto& [prop_id, value] : update.props) {
            out.u16(prop_id);
            wire::encode_value(value, out);
        }
    }

    ObjectUpdate decode_update(wire::ByteReader& in)
    {
        ObjectUpdate update;
        update.object_id = in.u32();
        update.class_id = in.u16();
        const uint16_t count = in.u16();
        update.props.reserve(count);
        for (uint16_t i = 0; i < count; ++i) {
            const uint16_t prop_id = in.u16();
            update.props.emplace_back(prop_id, wire::decode_value(in));
        }
        return update;
    }

    std::vector<uint8_t> encode_state_message(wire::BodyType type, uint64_t tick,
        const std::vector<ObjectUpdate>& objects)
    {
        wire::ByteWriter out;
        out.u8(static_cast<uint8_t>(type));
        out.u64(tick);
        out.u16(static_cast<uint16_t>(objects.size()));
        for (const auto& update : objects)
            encode_update(update, out);
        return out.take();
    }

    std::pair<uint64_t, std::vector<ObjectUpdate>> decode_state_message(wire::BodyType expected,
        std::span<const uint8_t> body)
    {
        wire::ByteReader in(body);
        if (in.u8() != static_cast<uint8_t>(expected))
            raise(Errc::unknown_body_type, "unexpected body type");
        const uint64_t tick = in.u64();
        const uint16_t count = in.u16();
        std::vector<ObjectUpdate> objects;
        objects.reserve(count);
        for (uint16_t i = 0; i < count; ++i)
            objects.push_back(decode_update(in));
        return { tick, std::move(objects) };
    }

} // namespace

std::vector<uint8_t> encode_delta(const DeltaMessage& delta)
{
    return encode_state_message(wire::BodyType::ReplicationDelta, delta.tick, delta.objects);
}

std::vector<uint8_t> encode_snapshot(const SnapshotMessage& snapshot)
{
    return encode_state_message(wire::BodyType::Snapshot, snapshot.tick, snapshot.objects);
}

DeltaMessage decode_delta(std::span<const uint8_t> body)
{
    auto [tick, objects] = decode_state_message(wire::BodyType::ReplicationDelta, body);
    return DeltaMessage { tick, std::move(objects) };
}

SnapshotMessage decode_snapshot(std::span<const uint8_t> body)
{
    auto [tick, objects] = decode_state_message(wire::BodyType::Snapshot, body);
    return SnapshotMessage { tick, std::move(objects) };
}

std::vector<uint8_t> encode_object(const ReplicatedObject& object, const schema::Schema& schema)
{
    const schema::ClassDef* cls = schema::lookup_class(schema, object.class_id);
    if (!cls)
        raise(Errc::invalid_argument, "unknown class id " + std::to_string(object.class_id));
    ObjectUpdate update;
    update.object_id = object.object_id;
    update.class_id = object.class_id;
    for (const auto& def : cls->properties) {
        if (!def.replicated)
            continue;
        const auto it = object.properties.find(def.prop_id);
        update.props.emplace_back(def.prop_id, it != object.properties.end() ? it->second : default_value(def.kind));
    }
    wire::ByteWriter out;
    encode_update(update, out);
    return out.take();
}

ReplicatedObject decode_object(std::span<const uint8_t> data)
{
    wire::ByteReader in(data);
    const ObjectUpdate update = decode_update(in);
    ReplicatedObject object;
    object.object_id = update.object_id;
    object.class_id = update.class_id;
    for (const auto& [prop_id, value] : update.props)
        object.properties[prop_id] = value;
    return object;
}

ObjectId ServerWorld::create_object(uint16_t class_id, std::optional<ClientId> owner,
    std::optional<ObjectId> object_id)
{
    const schema::ClassDef* cls = schema::lookup_class(*schema_, class_id);
    if (!cls)
        raise(Errc::invalid_argument, "unknown class id " + std::to_string(class_id));

    const ObjectId id = object_id.value_or(next_object_id_);
    if (state_.objects.count(id))
        raise(Errc::invalid_argument, "object id " + std::to_string(id) + " already exists");
    next_object_id_ = std::max(next_object_id_, id + 1);

    ReplicatedObject object;
    object.object_id = id;
    object.class_id = class_id;
    object.owner = owner;
    for (const auto& def : cls->properties) {
        object.properties[def.prop_id] = default_value(def.kind);
        if (def.replicated)
            dirty_.changed[id].insert(def.prop_id);
    }
    state_.objects.emplace(id, std::move(object));
    dirty_.created.push_back(id);
    return id;
}

void ServerWorld::destroy_object(ObjectId object_id)
{
    const auto it = state_.objects.find(object_id);
    if (it == state_.objects.end())
        raise(Errc::unknown_object, "object " + std::to_string(object_id));
    state_.objects.erase(it);
    dirty_.changed.erase(object_id);
    dirty_.destroyed.push_back(object_id);
}

SetOutcome ServerWorld::set_property(ObjectId object_id, uint16_t prop_id, PropertyValue value)
{
    const auto it = state_.objects.find(object_id);
    if (it == state_.objects.end())
        raise(Errc::unknown_object, "object " + std::to_string(object_id));
    ReplicatedObject& object = it->second;

    const schema::ClassDef* cls = schema::lookup_class(*schema_, object.class_id);
    const schema::PropertyDef* def = cls ? cls->find_property(prop_id) : nullptr;
    if (!def)
        raise(Errc::invalid_argument,
            "class " + std::to_string(object.class_id) + " declares no prop " + std::to_string(prop_id));
    if (def->kind != kind_of(value))
        raise(Errc::kind_mismatch,
            "prop '" + def->key + "' expects " + kind_name(def->kind) + ", got " + kind_name(kind_of(value)));

    PropertyValue& slot = object.properties[prop_id];
    const bool unchanged = slot == value;
    slot = std::move(value);

    if (!def->replicated)
        return SetOutcome::NotReplicated;
    if (!(suppress_unchanged_ && unchanged))
        dirty_.changed[object_id].insert(prop_id);
    return SetOutcome::Replicated;
}

ObjectUpdate ServerWorld::update_for(const ReplicatedObject& object, const std::set<uint16_t>* only_props) const
{
    const schema::ClassDef* cls = schema::lookup_class(*schema_, object.class_id);
    ObjectUpdate update;
    update.object_id = object.object_id;
    update.class_id = object.class_id;
    for (const auto& def : cls->properties) {
        if (!def.replicated)
            continue;
        if (only_props && !only_props->count(def.prop_id))
            continue;
        update.props.emplace_back(def.prop_id, object.properties.at(def.prop_id));
    }
    return update;
}

std::map<ClientId, DeltaMessage> ServerWorld::collect_deltas(std::span<const ClientView> clients,
    const RelevanceRule& rule)
{
    ++state_.tick;
    std::map<ClientId, DeltaMessage> out;
    for (const ClientView& client : clients) {
        DeltaMessage delta;
        delta.tick = state_.tick;
        for (const auto& [object_id, props] : dirty_.changed) {
            const auto it = state_.objects.find(object_id);
            if (it == state_.objects.end())
                continue; // destroyed after the write
            if (!relevant(it->second, *schema_, client.viewpoint, rule))
                continue;
            ObjectUpdate update = update_for(it->second, &props);
            if (!update.props.empty())
                delta.objects.push_back(std::move(update));
        }
        out.emplace(client.id, std::move(delta));
    }
    dirty_.clear();
    return out;
}

SnapshotMessage ServerWorld::full_snapshot(const ClientView& view, const RelevanceRule& rule) const
{
    SnapshotMessage snapshot;
    snapshot.tick = state_.tick;
    for (const auto& [object_id, object] : state_.objects) {
        if (!relevant(object, *schema_, view.viewpoint, rule))
            continue;
        snapshot.objects.push_back(update_for(object, nullptr));
    }
    return snapshot;
}

std::vector<uint8_t> canonical_world_bytes(const std::map<ObjectId, ReplicatedObject>& objects,
    const schema::Schema& schema)
{
    wire::ByteWriter out;
    out.u32(static_cast<uint32_t>(objects.size()));
    for (const auto& [id, object] : objects) {
        const auto encoded = encode_object(object, schema);
        out.bytes(encoded);
    }
    return out.take();
}

std::vector<uint8_t> ServerWorld::canonical_bytes() const
{
    return canonical_world_bytes(state_.objects, *schema_);
}

void ClientReplica::check_version() const
{
    if (server_version_ && *server_version_ != schema_->version)
        raise(Errc::schema_version_mismatch,
            "server schema v" + std::to_string(*server_version_) + " vs local v" + std::to_string(schema_->version));
}

void ClientReplica::apply_update(const ObjectUpdate& update)
{
    auto it = objects_.find(update.object_id);
    if (it == objects_.end()) {
        const schema::ClassDef* cls = schema::lookup_class(*schema_, update.class_id);
        if (!cls)
            raise(Errc::invalid_argument, "unknown class id " + std::to_string(update.class_id));
        ReplicatedObject object;
        object.object_id = update.object_id;
        object.class_id = update.class_id;
        for (const auto& def : cls->properties)
            object.properties[def.prop_id] = default_value(def.kind);
        it = objects_.emplace(update.object_id, std::move(object)).first;
    }
    const schema::ClassDef* cls = schema::lookup_class(*schema_, it->second.class_id);
    for (const auto& [prop_id, value] : update.props) {
        const schema::PropertyDef* def = cls ? cls->find_property(prop_id) : nullptr;
        if (!def)
            raise(Errc::invalid_argument, "unknown prop " + std::to_string(prop_id));
        if (def->kind != kind_of(value))
            raise(Errc::kind_mismatch, "prop '" + def->key + "' expects " + kind_name(def->kind));
        it->second.properties[prop_id] = value;
    }
}

bool ClientReplica::apply_delta(const DeltaMessage& delta)
{
    check_version();
    if (delta.tick <= last_tick_)
        return false; // stale
    for (const auto& update : delta.objects)
        apply_update(update);
    last_tick_ = delta.tick;
    return true;
}

void ClientReplica::apply_snapshot(const SnapshotMessage& snapshot)
{
    check_version();
    objects_.clear();
    for (const auto& update : snapshot.objects)
        apply_update(update);
    last_tick_ = snapshot.tick;
}

std::vector<uint8_t> ClientReplica::canonical_bytes() const
{
    return canonical_world_bytes(objects_, *schema_);
}

} // namespace worldsync::repl
