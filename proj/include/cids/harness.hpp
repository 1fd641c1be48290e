#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cids/agents.hpp"
#include "cids/chain.hpp"
#include "cids/scenario.hpp"

namespace cids {

struct TrajectoryPoint {
    int round = 0;
    double t = 0.0;
    double T_after = 0.0;
};

// One contributor identity's trust history. A whitewasher produces one
// trajectory per identity; the series grows only on validated submissions.
struct TrustTrajectory {
    std::string contributor;  // identity label, unique within a run
    std::string key_hex;
    std::vector<TrajectoryPoint> series;
};

struct RejectionRecord {
    int round = 0;
    std::string agent;
    std::string operation;
    RejectCode code = RejectCode::none;
};

struct VoteRecord {
    int round = 0;
    std::string rule_address;
    std::string validator;
    int phi = 0;
    double s = 0.0;
    VerdictRationale rationale = VerdictRationale::matches_ground_truth;
};

struct RegularUpdateRecord {
    int round = 0;
    std::string agent;
    std::string rule_address;
    RegularAgent::UpdateStatus status = RegularAgent::UpdateStatus::included;
};

struct RunArtifacts {
    std::vector<TrustTrajectory> trajectories;        // contributor declaration order
    std::vector<RejectionRecord> rejections;
    std::vector<VoteRecord> vote_audit;
    std::vector<RegularUpdateRecord> regular_updates;
    std::map<std::string, double> final_T;            // identity label -> reputation
    std::map<std::string, std::string> identity_of;   // key hex -> identity label
    std::map<std::string, std::size_t> r_loc_sizes;   // regular agent -> |R_loc|
    std::size_t r_db_size = 0;
    std::string state_hash;
};

// Owns one run: registry, store, chain and agents. Deterministic for a
// given (config, seed); the loop is single-threaded.
class Simulation {
public:
    explicit Simulation(ScenarioConfig config);

    // Registration phase plus `rounds` full submit -> validate -> confirm
    // cycles. Callable once.
    const RunArtifacts& run();

    // trust_trajectories.csv, decisions.csv, summary.csv, txlog.jsonl and
    // bundles/<address>.bundle under `dir`. Throws Error(io) on unwritable
    // paths.
    void write_artifacts(const std::string& dir) const;

    const ScenarioConfig& config() const { return config_; }
    const Chain& chain() const { return *chain_; }
    const RuleStore& store() const { return *store_; }
    const RunArtifacts& artifacts() const { return artifacts_; }
    const std::vector<RegularAgent>& regular_agents() const { return regulars_; }

private:
    void register_agents();
    void run_round(int round);
    void contributor_turn(ContributorAgent& agent, int round);
    std::string fresh_identity_label(const ContributorAgent& agent, int round) const;

    ScenarioConfig config_;
    Corpus corpus_;
    std::unique_ptr<NodeRegistry> registry_;
    std::unique_ptr<RuleStore> store_;
    std::unique_ptr<Chain> chain_;

    std::vector<ContributorAgent> contributors_;
    std::vector<ValidatorAgent> validators_;
    std::vector<RegularAgent> regulars_;
    std::vector<NodeKeyPair> validator_keys_;
    std::map<std::string, std::uint64_t> rejoin_seeds_;  // agent name -> fresh key seed

    bool ran_ = false;
    RunArtifacts artifacts_;
    std::map<std::string, std::size_t> trajectory_index_;  // key hex -> trajectories_ slot
};

RunArtifacts run_scenario(const ScenarioConfig& config);

// --- transaction log export / replay / audits ---

void export_log(const Chain& chain, std::ostream& out);

struct ParsedLog {
    GenesisConfig genesis;
    std::vector<LogRecord> records;
    std::string recorded_state_hash;
};

ParsedLog parse_log(std::istream& in);       // throws Error(io|invariant)
ParsedLog load_log(const std::string& path);

// Re-folds the log and checks the rebuilt state hash against the recorded
// one. Returns the recomputed hash.
std::string replay_and_verify(const ParsedLog& log);

// Recomputes every rule trust and reputation from the raw votes in the log
// and checks them against the admissible bounds (and recorded
// confirmations). Throws Error(invariant) on any violation; returns the
// number of checked values.
std::size_t verify_log_bounds(const ParsedLog& log);

// Re-hashes every bundle under <run_dir>/bundles. Returns the bundle
// count; throws Error(invariant) on a digest mismatch, Error(io) when the
// directory is missing.
std::size_t audit_run_dir(const std::string& run_dir);

std::string format_double(double value);  // shortest round-trip decimal

}  // namespace cids
