#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cids/errors.hpp"
#include "cids/harness.hpp"

namespace {

int run_command(const std::string& scenario_path, bool seed_set, std::uint64_t seed_override,
                const std::string& output_override) {
    cids::ScenarioConfig config = cids::ScenarioConfig::load(scenario_path);
    if (seed_set) config.seed = seed_override;

    std::string output = output_override;
    if (output.empty()) output = config.output_path;
    if (output.empty()) {
        if (const char* env = std::getenv("CIDS_OUTPUT_DIR")) output = env;
    }
    if (output.empty()) output = "run-output";

    cids::Simulation simulation(std::move(config));
    const cids::RunArtifacts& artifacts = simulation.run();
    simulation.write_artifacts(output);

    std::cout << "rounds: " << simulation.config().rounds << "\n";
    std::cout << "r_db size: " << artifacts.r_db_size << "\n";
    for (const cids::TrustTrajectory& trajectory : artifacts.trajectories) {
        std::cout << "final T " << trajectory.contributor << ": "
                  << cids::format_double(artifacts.final_T.at(trajectory.contributor)) << "\n";
    }
    std::cout << "state hash: " << artifacts.state_hash << "\n";
    std::cout << "artifacts written to " << output << "\n";
    return 0;
}

int replay_command(const std::string& txlog_path) {
    cids::ParsedLog log = cids::load_log(txlog_path);
    std::string hash = cids::replay_and_verify(log);
    std::cout << "replayed " << log.records.size() << " records, state hash " << hash << "\n";
    return 0;
}

int verify_bounds_command(const std::string& txlog_path) {
    cids::ParsedLog log = cids::load_log(txlog_path);
    std::size_t checked = cids::verify_log_bounds(log);
    std::cout << "verified " << checked << " recorded scores against their bounds\n";
    return 0;
}

int audit_store_command(const std::string& run_dir) {
    std::size_t count = cids::audit_run_dir(run_dir);
    std::cout << "audited " << count << " bundles, all addresses match\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative IDS trust simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string txlog_path;
    std::string run_dir;
    std::string output_override;
    std::uint64_t seed_override = 0;

    CLI::App* run = app.add_subcommand("run", "Execute a scenario file");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed_override, "Override the scenario seed");
    run->add_option("--output", output_override,
                    "Output directory (default: scenario output_path, then $CIDS_OUTPUT_DIR)");

    CLI::App* replay = app.add_subcommand("replay", "Re-fold a transaction log and verify state");
    replay->add_option("txlog", txlog_path, "Transaction log (jsonl)")->required();

    CLI::App* verify = app.add_subcommand("verify-bounds",
                                          "Check every recorded score against its bounds");
    verify->add_option("txlog", txlog_path, "Transaction log (jsonl)")->required();

    CLI::App* audit = app.add_subcommand("audit-store", "Re-hash every bundle in a run directory");
    audit->add_option("run_dir", run_dir, "Run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            return run_command(scenario_path, seed_opt->count() > 0, seed_override,
                               output_override);
        }
        if (replay->parsed()) return replay_command(txlog_path);
        if (verify->parsed()) return verify_bounds_command(txlog_path);
        if (audit->parsed()) return audit_store_command(run_dir);
    } catch (const cids::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cids::exit_code_for(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
