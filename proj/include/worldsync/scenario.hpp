#pragma once

#include "worldsync/net.hpp"
#include "worldsync/schema.hpp"
#include "worldsync/statestore.hpp"

#include <string>
#include <vector>

namespace worldsync::harness {

enum class Topology {
    Direct, // client straight to one server, no hosted tier
    StatefulDedicated, // replication server, scene pinned to one backend
    StatelessRpc, // RPC-only instances over a shared store
    BrokeredIngestion, // sensors -> broker -> workers -> server -> replicas
    Hybrid, // all three tiers side by side
};

const char* topology_name(Topology topology);
Topology topology_from_name(const std::string& name); // throws InvalidScenario

struct ScriptConfig {
    std::string op = "mixed"; // set_appearance | adjust_score | move | telemetry | mixed
    int ops_per_client = 20;
    bool closed_loop = true;
    double period_ms = 50.0; // open-loop pacing per client
    int retry_limit = 0; // stateless retry on timeout
};

struct FaultEvent {
    std::string type; // backend_down | client_ip_change
    double at_ms = 0.0;
    uint32_t backend = 0;
    uint32_t client = 0; // 1-based client index
};

struct BrokerSetup {
    size_t partitions = 4;
    int sensors = 2;
    int workers = 2;
    int events_per_sensor = 20;
    double publish_interval_ms = 50.0;
    double deliver_interval_ms = 10.0;
    std::string mode = "push"; // push | pull
};

struct Scenario {
    std::string name = "scenario";
    Topology topology = Topology::StatefulDedicated;
    uint64_t seed = 1;
    double duration_ms = 5000.0;
    schema::Schema contract;

    int clients = 3;
    int servers = 1;
    int late_joiners = 0;
    double late_join_at_ms = 1000.0;

    net::NetConditions conditions;
    double rto_ms = 0.0; // 0 derives 3x one-way latency
    size_t mtu = 1200;
    double timeout_ms = 0.0; // 0 derives 10x rto

    double tick_interval_ms = 50.0;
    double service_time_ms = 0.1;
    bool reliable_deltas = true;
    std::string relevance = "all"; // all | radius
    double relevance_radius = 0.0;

    store::StoreProfile store_profile { 5.0, 5.0, store::Consistency::CP, 0.0 };
    bool use_cache = false;
    size_t cache_capacity = 64;
    bool cas_enabled = true;
    std::string pool_policy = "round_robin"; // round_robin | flow_hash
    double affinity_expiry_ms = 0.0;

    bool clock_sync = false;
    double clock_ping_interval_ms = 500.0;
    std::vector<double> clock_offsets_ms; // per client, cycled

    ScriptConfig script;
    std::vector<FaultEvent> faults;
    BrokerSetup broker;
    std::vector<double> fps_targets { 24.0, 90.0, 144.0 };

    uint64_t scenario_hash = 0; // fnv-1a of the source text

    double effective_rto_ms() const;
    double effective_timeout_ms() const;
};

// Parses the documented JSON scenario format. schema_file paths resolve
// against base_dir; unknown keys are rejected.
Scenario scenario_from_json(const std::string& json_text, const std::string& base_dir); // throws InvalidScenario
Scenario load_scenario_file(const std::string& path);

} // namespace worldsync::harness
