#include "worldsync/error.hpp"
#include "worldsync/harness.hpp"
#include "worldsync/schema.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int schema_check(const std::string& path)
{
    const auto contract = worldsync::schema::load_schema_file(path);
    const auto violations = worldsync::schema::validate_schema(contract);
    if (violations.empty()) {
        std::cout << "ok: " << contract.classes.size() << " classes, " << contract.methods.size()
                  << " methods, version " << contract.version << "\n";
        return 0;
    }
    for (const auto& violation : violations)
        std::cout << "violation: " << violation << "\n";
    return 1;
}

int sim_run(const std::string& path, std::optional<uint64_t> seed, const std::string& out_path)
{
    auto scenario = worldsync::harness::load_scenario_file(path);
    if (seed)
        scenario.seed = *seed;
    const auto report = worldsync::harness::run_scenario(scenario);
    const std::string text = report.to_json();
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot write '" << out_path << "'\n";
            return 1;
        }
        out << text;
        std::cout << "report written to " << out_path << "\n";
    }
    return 0;
}

int advise(double latency_ms, double users)
{
    const auto rec = worldsync::harness::recommend(latency_ms, users);
    std::cout << "verdict: " << worldsync::harness::verdict_name(rec.verdict) << "\n";
    std::cout << "rationale: " << rec.rationale << "\n";
    return 0;
}

int equiv(const std::string& path, int instances, int seeds)
{
    const auto scenario = worldsync::harness::load_scenario_file(path);
    const auto sweep = worldsync::harness::equivalence_sweep(scenario, instances, seeds, true);
    std::cout << "seeds: " << sweep.seeds_run << ", divergent: " << sweep.divergent << "\n";
    if (sweep.divergent == 0) {
        std::cout << "equivalent: stateless x" << instances
                  << " with cas-retry matches the single stateful server on every seed\n";
        return 0;
    }
    for (const auto seed : sweep.divergent_seeds) {
        const auto detail = worldsync::harness::equivalence_check(scenario, instances, seed, true);
        std::cout << "seed " << seed << ": " << detail.divergence << "\n";
    }
    return 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "world-state synchronization framework and network-simulation harness" };
    app.require_subcommand(1);

    auto* schema_cmd = app.add_subcommand("schema", "contract file tools");
    schema_cmd->require_subcommand(1);
    std::string schema_path;
    auto* check_cmd = schema_cmd->add_subcommand("check", "parse and validate a contract file");
    check_cmd->add_option("file", schema_path, "contract file")->required();

    auto* sim_cmd = app.add_subcommand("sim", "simulation runs");
    sim_cmd->require_subcommand(1);
    std::string scenario_path;
    std::optional<uint64_t> seed;
    std::string out_path;
    auto* run_cmd = sim_cmd->add_subcommand("run", "run a scenario and emit its report");
    run_cmd->add_option("scenario", scenario_path, "scenario file (json)")->required();
    run_cmd->add_option("--seed", seed, "override the scenario seed");
    run_cmd->add_option("--out", out_path, "write the report to a file");

    auto* advise_cmd = app.add_subcommand("advise", "deployment recommendation from latency budget and scene size");
    double latency_ms = 0.0;
    double users = 0.0;
    advise_cmd->add_option("--latency-ms", latency_ms, "end-to-end latency budget in ms")->required();
    advise_cmd->add_option("--users", users, "users visible per 3D scene")->required();

    auto* equiv_cmd = app.add_subcommand("equiv", "stateful vs stateless final-state equivalence sweep");
    std::string equiv_path;
    int instances = 3;
    int seeds = 10;
    equiv_cmd->add_option("scenario", equiv_path, "scenario file (json)")->required();
    equiv_cmd->add_option("--instances", instances, "stateless instance count");
    equiv_cmd->add_option("--seeds", seeds, "number of seeds to sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        if (check_cmd->parsed())
            return schema_check(schema_path);
        if (run_cmd->parsed())
            return sim_run(scenario_path, seed, out_path);
        if (advise_cmd->parsed())
            return advise(latency_ms, users);
        if (equiv_cmd->parsed())
            return equiv(equiv_path, instances, seeds);
    } catch (const worldsync::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
