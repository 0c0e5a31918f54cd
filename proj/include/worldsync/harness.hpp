#pragma once

#include "worldsync/budget.hpp"
#include "worldsync/replication.hpp"
#include "worldsync/scenario.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace worldsync::harness {

inline constexpr const char* kToolVersion = "0.1.0";

struct ClassStats {
    size_t count = 0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p99 = 0.0;
    double max = 0.0;
    double mean_ms = 0.0;
    double mean_network_ms = 0.0;
    double mean_store_ms = 0.0;
    double mean_processing_ms = 0.0; // mean_ms == network + store + processing
    double throughput_per_s = 0.0;
};

struct BudgetVerdict {
    double fps = 0.0;
    double period_display_ms = 0.0;
    std::string classification;
    std::map<std::string, bool> within_budget; // event class -> p99 fits the period
};

struct ClockSummary {
    int clients = 0;
    double max_abs_error_ms = 0.0;
    double max_selected_rtt_ms = 0.0;
    bool exact = true; // every estimate equals the configured offset
    bool bound_satisfied = true; // |error| <= rtt/2 per client
};

struct LatencyReport {
    std::string scenario_name;
    std::string topology;
    uint64_t seed = 0;
    uint64_t scenario_hash = 0;
    std::string tool_version = kToolVersion;
    uint32_t schema_version = 0;
    double duration_ms = 0.0;

    std::map<std::string, ClassStats> classes;

    uint64_t frames_sent = 0;
    uint64_t frames_delivered = 0;
    uint64_t frames_dropped = 0;
    uint64_t frames_duplicated = 0;
    uint64_t disruptions = 0;
    uint64_t timeouts = 0;
    uint64_t retries = 0;
    uint64_t failures = 0;
    uint64_t give_ups = 0;

    std::vector<BudgetVerdict> budgets;
    std::optional<ClockSummary> clock;

    uint64_t ops_sent = 0;
    uint64_t ops_completed = 0;
    uint64_t final_state_hash = 0;
    bool scripts_completed = true;

    std::string to_json() const; // canonical: byte-identical for equal runs
};

// Deterministic: one (scenario, seed) pair, one report.
LatencyReport run_scenario(const Scenario& scenario);
LatencyReport run_scenario(Scenario scenario, uint64_t seed_override);

// Full-topology run output for oracles that need the final world.
struct RunResult {
    LatencyReport report;
    std::map<repl::ObjectId, repl::ReplicatedObject> final_objects;
};
RunResult run_scenario_full(const Scenario& scenario);

// The stateless-server hypothesis check: a single stateful run and an
// N-instance stateless run consume the same client op log; equal final
// state is the pass condition.
struct EquivalenceResult {
    bool equal = false;
    std::string divergence; // empty when equal
};
EquivalenceResult equivalence_check(const Scenario& base, int instances, uint64_t seed, bool cas_enabled);

struct EquivalenceSweep {
    int seeds_run = 0;
    int divergent = 0;
    std::vector<uint64_t> divergent_seeds;
};
EquivalenceSweep equivalence_sweep(const Scenario& base, int instances, int seeds, bool cas_enabled);

// Open-loop capacity probe: offered load vs completed load within the run.
struct CapacityPoint {
    double offered_rps = 0.0;
    double completed_rps = 0.0;
    double completion_ratio = 0.0;
};
struct CapacityResult {
    std::vector<CapacityPoint> points;
    double max_sustainable_rps = 0.0; // highest offered load completing >= 99%
};
CapacityResult capacity_sweep(const Scenario& base, bool scene_pinned, int backends,
    const std::vector<double>& offered_rps);

} // namespace worldsync::harness
