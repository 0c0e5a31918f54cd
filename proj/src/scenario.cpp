#include "worldsync/scenario.hpp"

#include "worldsync/error.hpp"
#include "worldsync/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace worldsync::harness {

using nlohmann::json;

const char* topology_name(Topology topology)
{
    switch (topology) {
    case Topology::Direct: return "direct";
    case Topology::StatefulDedicated: return "stateful_dedicated";
    case Topology::StatelessRpc: return "stateless_rpc";
    case Topology::BrokeredIngestion: return "brokered_ingestion";
    case Topology::Hybrid: return "hybrid";
    }
    return "?";
}

Topology topology_from_name(const std::string& name)
{
    for (const Topology t : { Topology::Direct, Topology::StatefulDedicated, Topology::StatelessRpc,
             Topology::BrokeredIngestion, Topology::Hybrid })
        if (name == topology_name(t))
            return t;
    raise(Errc::invalid_scenario, "unknown topology '" + name + "'");
}

double Scenario::effective_rto_ms() const
{
    if (rto_ms > 0.0)
        return rto_ms;
    return std::max(1.0, 3.0 * conditions.one_way_latency_ms);
}

double Scenario::effective_timeout_ms() const
{
    if (timeout_ms > 0.0)
        return timeout_ms;
    return 10.0 * effective_rto_ms();
}

namespace {

    [[noreturn]] void bad(const std::string& message) { raise(Errc::invalid_scenario, message); }

    void check_keys(const json& object, const char* where, std::initializer_list<const char*> known)
    {
        for (const auto& [key, value] : object.items()) {
            if (std::find_if(known.begin(), known.end(), [&key](const char* k) { return key == k; }) == known.end())
                bad(std::string("unknown key '") + key + "' in " + where);
        }
    }

    template <typename T>
    T field(const json& object, const char* key, T fallback)
    {
        if (!object.contains(key))
            return fallback;
        try {
            return object.at(key).get<T>();
        } catch (const json::exception&) {
            bad(std::string("bad value for '") + key + "'");
        }
    }

    net::NetConditions parse_conditions(const json& object)
    {
        check_keys(object, "net",
            { "one_way_latency_ms", "jitter_ms", "loss_rate", "duplicate_rate", "reorder_rate" });
        net::NetConditions cond;
        cond.one_way_latency_ms = field(object, "one_way_latency_ms", 0.0);
        cond.jitter_ms = field(object, "jitter_ms", 0.0);
        cond.loss_rate = field(object, "loss_rate", 0.0);
        cond.duplicate_rate = field(object, "duplicate_rate", 0.0);
        cond.reorder_rate = field(object, "reorder_rate", 0.0);
        for (const double rate : { cond.loss_rate, cond.duplicate_rate, cond.reorder_rate })
            if (rate < 0.0 || rate > 1.0)
                bad("net rates must lie in [0, 1]");
        if (cond.one_way_latency_ms < 0.0 || cond.jitter_ms < 0.0)
            bad("latency and jitter must be non-negative");
        return cond;
    }

} // namespace

Scenario scenario_from_json(const std::string& json_text, const std::string& base_dir)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        bad(std::string("json parse error: ") + e.what());
    }
    check_keys(root, "scenario",
        { "name", "topology", "seed", "duration_ms", "schema_file", "schema_inline", "clients", "servers",
            "late_joiners", "late_join_at_ms", "net", "rto_ms", "mtu", "timeout_ms", "tick_interval_ms",
            "service_time_ms", "reliable_deltas", "relevance", "relevance_radius", "store", "pool", "clock",
            "script", "faults", "broker", "fps_targets" });

    Scenario s;
    s.scenario_hash = fnv1a64(json_text);
    s.name = field<std::string>(root, "name", "scenario");
    s.topology = topology_from_name(field<std::string>(root, "topology", "stateful_dedicated"));
    s.seed = field<uint64_t>(root, "seed", 1);
    s.duration_ms = field(root, "duration_ms", 5000.0);
    if (s.duration_ms <= 0.0)
        bad("duration_ms must be positive");

    if (root.contains("schema_inline")) {
        s.contract = schema::parse_schema(root.at("schema_inline").get<std::string>());
    } else if (root.contains("schema_file")) {
        const std::string name = root.at("schema_file").get<std::string>();
        const std::string path = (!name.empty() && name.front() == '/') || base_dir.empty()
            ? name
            : base_dir + "/" + name;
        s.contract = schema::load_schema_file(path);
    } else {
        bad("scenario needs schema_file or schema_inline");
    }
    if (const auto violations = schema::validate_schema(s.contract); !violations.empty())
        bad("contract invalid: " + violations.front());

    s.clients = field(root, "clients", 3);
    s.servers = field(root, "servers", 1);
    if (s.clients < 1 || s.servers < 1)
        bad("clients and servers must be >= 1");
    s.late_joiners = field(root, "late_joiners", 0);
    s.late_join_at_ms = field(root, "late_join_at_ms", 1000.0);
    if (s.late_joiners > s.clients)
        bad("late_joiners cannot exceed clients");

    if (root.contains("net"))
        s.conditions = parse_conditions(root.at("net"));
    s.rto_ms = field(root, "rto_ms", 0.0);
    s.mtu = field<size_t>(root, "mtu", 1200);
    s.timeout_ms = field(root, "timeout_ms", 0.0);

    s.tick_interval_ms = field(root, "tick_interval_ms", 50.0);
    s.service_time_ms = field(root, "service_time_ms", 0.1);
    s.reliable_deltas = field(root, "reliable_deltas", true);
    s.relevance = field<std::string>(root, "relevance", "all");
    if (s.relevance != "all" && s.relevance != "radius")
        bad("relevance must be 'all' or 'radius'");
    s.relevance_radius = field(root, "relevance_radius", 0.0);
    if (s.relevance == "radius" && s.relevance_radius <= 0.0)
        bad("radius relevance needs relevance_radius > 0");

    if (root.contains("store")) {
        const json& st = root.at("store");
        check_keys(st, "store",
            { "read_latency_ms", "write_latency_ms", "consistency", "staleness_ms", "cache_capacity",
                "cas_enabled" });
        s.store_profile.read_latency_ms = field(st, "read_latency_ms", 5.0);
        s.store_profile.write_latency_ms = field(st, "write_latency_ms", 5.0);
        const std::string consistency = field<std::string>(st, "consistency", "cp");
        if (consistency == "cp")
            s.store_profile.consistency = store::Consistency::CP;
        else if (consistency == "ap")
            s.store_profile.consistency = store::Consistency::AP;
        else
            bad("store consistency must be 'cp' or 'ap'");
        s.store_profile.staleness_ms = field(st, "staleness_ms", 0.0);
        if (st.contains("cache_capacity")) {
            s.use_cache = true;
            s.cache_capacity = field<size_t>(st, "cache_capacity", 64);
        }
        s.cas_enabled = field(st, "cas_enabled", true);
    }

    if (root.contains("pool")) {
        const json& pool = root.at("pool");
        check_keys(pool, "pool", { "policy", "affinity_expiry_ms" });
        s.pool_policy = field<std::string>(pool, "policy", "round_robin");
        if (s.pool_policy != "round_robin" && s.pool_policy != "flow_hash")
            bad("pool policy must be 'round_robin' or 'flow_hash'");
        s.affinity_expiry_ms = field(pool, "affinity_expiry_ms", 0.0);
    }

    if (root.contains("clock")) {
        const json& clock = root.at("clock");
        check_keys(clock, "clock", { "enabled", "ping_interval_ms", "offsets_ms" });
        s.clock_sync = field(clock, "enabled", true);
        s.clock_ping_interval_ms = field(clock, "ping_interval_ms", 500.0);
        if (clock.contains("offsets_ms"))
            s.clock_offsets_ms = clock.at("offsets_ms").get<std::vector<double>>();
    }

    if (root.contains("script")) {
        const json& script = root.at("script");
        check_keys(script, "script", { "op", "ops_per_client", "closed_loop", "period_ms", "retry_limit" });
        s.script.op = field<std::string>(script, "op", "mixed");
        s.script.ops_per_client = field(script, "ops_per_client", 20);
        s.script.closed_loop = field(script, "closed_loop", true);
        s.script.period_ms = field(script, "period_ms", 50.0);
        s.script.retry_limit = field(script, "retry_limit", 0);
    }

    if (root.contains("faults")) {
        for (const json& item : root.at("faults")) {
            check_keys(item, "fault", { "type", "at_ms", "backend", "client" });
            FaultEvent fault;
            fault.type = field<std::string>(item, "type", "");
            if (fault.type != "backend_down" && fault.type != "client_ip_change")
                bad("fault type must be 'backend_down' or 'client_ip_change'");
            fault.at_ms = field(item, "at_ms", 0.0);
            fault.backend = field<uint32_t>(item, "backend", 0);
            fault.client = field<uint32_t>(item, "client", 0);
            s.faults.push_back(fault);
        }
    }

    if (root.contains("broker")) {
        const json& broker = root.at("broker");
        check_keys(broker, "broker",
            { "partitions", "sensors", "workers", "events_per_sensor", "publish_interval_ms",
                "deliver_interval_ms", "mode" });
        s.broker.partitions = field<size_t>(broker, "partitions", 4);
        s.broker.sensors = field(broker, "sensors", 2);
        s.broker.workers = field(broker, "workers", 2);
        s.broker.events_per_sensor = field(broker, "events_per_sensor", 20);
        s.broker.publish_interval_ms = field(broker, "publish_interval_ms", 50.0);
        s.broker.deliver_interval_ms = field(broker, "deliver_interval_ms", 10.0);
        s.broker.mode = field<std::string>(broker, "mode", "push");
        if (s.broker.mode != "push" && s.broker.mode != "pull")
            bad("broker mode must be 'push' or 'pull'");
    }

    if (root.contains("fps_targets"))
        s.fps_targets = root.at("fps_targets").get<std::vector<double>>();

    return s;
}

Scenario load_scenario_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(Errc::invalid_scenario, "cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto slash = path.find_last_of('/');
    const std::string base_dir = slash == std::string::npos ? std::string(".") : path.substr(0, slash);
    return scenario_from_json(buf.str(), base_dir);
}

} // namespace worldsync::harness
