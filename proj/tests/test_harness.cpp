#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cids/errors.hpp"
#include "cids/harness.hpp"
#include "test_support.hpp"

using namespace cids;
using namespace cids::testing;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("cids-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int count_tx_f(const Chain& chain) {
    int count = 0;
    for (const LogRecord& record : chain.log()) {
        const auto* tx = std::get_if<ChainTransaction>(&record);
        if (tx != nullptr && tx->kind == TxKind::rule_confirmation) ++count;
    }
    return count;
}

}  // namespace

TEST_CASE("honest run: conservation, trajectories and R_loc growth") {
    ScenarioConfig config = base_scenario(424242, 10);
    Simulation sim(config);
    const RunArtifacts& artifacts = sim.run();

    CHECK(artifacts.r_db_size == 10);  // every honest rule confirmed
    REQUIRE(artifacts.trajectories.size() == 1);
    const TrustTrajectory& trajectory = artifacts.trajectories[0];
    REQUIRE(trajectory.series.size() == 10);

    // Conservation: |r_db| = Tx_f count = E^o count.
    int confirmations = count_tx_f(sim.chain());
    int confirmed_events = 0;
    for (const ChainEvent& event : sim.chain().events()) {
        if (event.kind == EventKind::rule_confirmed) ++confirmed_events;
    }
    CHECK(confirmations == 10);
    CHECK(confirmed_events == 10);

    // Every recorded reputation stays within its bounds.
    for (std::size_t i = 0; i < trajectory.series.size(); ++i) {
        Bounds bounds = reputation_bounds(config.trm, static_cast<int>(i) + 1);
        CHECK(within_bounds(trajectory.series[i].T_after, bounds, 1e-12));
        CHECK(within_bounds(trajectory.series[i].t, rule_trust_bounds(config.trm), 1e-12));
    }

    // Early confirmations are excluded from R_loc while the contributor's
    // reputation is still below the threshold, later ones are included.
    REQUIRE_FALSE(artifacts.regular_updates.empty());
    CHECK(artifacts.regular_updates.front().status == RegularAgent::UpdateStatus::excluded);
    CHECK(artifacts.regular_updates.back().status == RegularAgent::UpdateStatus::included);
    std::size_t r_loc = artifacts.r_loc_sizes.at("cr1");
    CHECK(r_loc > 0);
    CHECK(r_loc < 10);

    // R_loc only ever contains confirmed rules.
    const RegularAgent& regular = sim.regular_agents().front();
    CHECK(regular.local_rules().size() == r_loc);
}

TEST_CASE("same config and seed give byte-identical artifacts") {
    fs::path dir_a = scratch_dir("det-a");
    fs::path dir_b = scratch_dir("det-b");

    ScenarioConfig config = base_scenario(7, 6);
    Simulation first(config);
    first.run();
    first.write_artifacts(dir_a.string());

    Simulation second(config);
    second.run();
    second.write_artifacts(dir_b.string());

    for (const char* name :
         {"trust_trajectories.csv", "decisions.csv", "summary.csv", "txlog.jsonl"}) {
        CHECK_MESSAGE(slurp(dir_a / name) == slurp(dir_b / name), name);
    }
    CHECK(first.artifacts().state_hash == second.artifacts().state_hash);

    // A different seed changes the validator score draws.
    ScenarioConfig other = config;
    other.seed = 8;
    Simulation third(other);
    third.run();
    CHECK(third.artifacts().state_hash != first.artifacts().state_hash);
}

TEST_CASE("csv formats are stable") {
    fs::path dir = scratch_dir("csv");
    ScenarioConfig config = base_scenario(11, 3);
    Simulation sim(config);
    sim.run();
    sim.write_artifacts(dir.string());

    std::istringstream trajectories(slurp(dir / "trust_trajectories.csv"));
    std::string line;
    REQUIRE(std::getline(trajectories, line));
    CHECK(line == "round,contributor,t,T");
    int rows = 0;
    while (std::getline(trajectories, line)) ++rows;
    CHECK(rows == 3);

    std::istringstream decisions(slurp(dir / "decisions.csv"));
    REQUIRE(std::getline(decisions, line));
    CHECK(line == "rule_address,contributor,decision,vote_vector");
    while (std::getline(decisions, line)) {
        CHECK(line.find(",+1,") != std::string::npos);  // honest-only run
        CHECK(line.find("cc1") != std::string::npos);
    }

    std::string summary = slurp(dir / "summary.csv");
    CHECK(summary.rfind("metric,subject,value\n", 0) == 0);
    CHECK(summary.find("final_T,cc1,") != std::string::npos);
    CHECK(summary.find("r_db_size,,3") != std::string::npos);
    CHECK(summary.find("r_loc_size,cr1,") != std::string::npos);
}

TEST_CASE("honest, turncoat and malicious reputations separate") {
    ScenarioConfig config = base_scenario(99, 30);
    AgentProfile turncoat = contributor_agent("cc2", 202, BehaviorKind::turncoat);
    turncoat.behavior.switch_at = 15;
    config.agents.push_back(turncoat);
    config.agents.push_back(contributor_agent("cc3", 203, BehaviorKind::always_malicious));

    const RunArtifacts artifacts = run_scenario(config);
    REQUIRE(artifacts.trajectories.size() == 3);
    auto at_round = [](const TrustTrajectory& trajectory, int round) {
        for (const TrajectoryPoint& p : trajectory.series) {
            if (p.round == round) return p.T_after;
        }
        REQUIRE(false);
        return 0.0;
    };
    const TrustTrajectory& t1 = artifacts.trajectories[0];
    const TrustTrajectory& t2 = artifacts.trajectories[1];
    const TrustTrajectory& t3 = artifacts.trajectories[2];

    CHECK(std::abs(at_round(t1, 15) - at_round(t2, 15)) < 0.05);
    CHECK(std::abs(at_round(t2, 30) - at_round(t3, 30)) < 0.1);
    CHECK(at_round(t1, 30) - at_round(t3, 30) > 0.3);

    // The malicious contributor's rules never reach R_db.
    CHECK(artifacts.r_db_size < 2u * 30u);
    for (const TrajectoryPoint& p : t3.series) CHECK(p.T_after < 0.15);
}

TEST_CASE("self-promotion is futile") {
    ScenarioConfig honest = base_scenario(31337, 8);
    ScenarioConfig promo = honest;
    promo.agents[4].behavior.kind = BehaviorKind::self_promoter;

    Simulation honest_sim(honest);
    Simulation promo_sim(promo);
    const RunArtifacts& honest_art = honest_sim.run();
    const RunArtifacts& promo_art = promo_sim.run();

    // Every self-vote bounced at the validator-set check.
    int self_votes = 0;
    for (const RejectionRecord& rejection : promo_art.rejections) {
        if (rejection.operation == "self_vote") {
            ++self_votes;
            CHECK(rejection.code == RejectCode::auth);
        }
    }
    CHECK(self_votes == 8);

    // Reputation identical to the honest baseline, bit for bit.
    REQUIRE(honest_art.trajectories[0].series.size() ==
            promo_art.trajectories[0].series.size());
    for (std::size_t i = 0; i < honest_art.trajectories[0].series.size(); ++i) {
        CHECK(honest_art.trajectories[0].series[i].T_after ==
              promo_art.trajectories[0].series[i].T_after);
    }
    CHECK(honest_art.state_hash == promo_art.state_hash);
}

TEST_CASE("ballot stuffing is caught on-chain and by validators") {
    ScenarioConfig config = base_scenario(555, 7);
    config.agents[4].behavior.kind = BehaviorKind::ballot_stuffer;

    Simulation sim(config);
    const RunArtifacts& artifacts = sim.run();

    // Verbatim resubmissions (even rounds) die on-chain as duplicates.
    int on_chain_duplicates = 0;
    for (const RejectionRecord& rejection : artifacts.rejections) {
        if (rejection.operation == "submit_rule") {
            CHECK(rejection.code == RejectCode::duplicate);
            CHECK(rejection.round % 2 == 0);
            ++on_chain_duplicates;
        }
    }
    CHECK(on_chain_duplicates == 3);  // rounds 2, 4, 6

    // Cosmetic resubmissions (odd rounds) reach the validators and draw
    // unanimous duplicate verdicts.
    for (const VoteRecord& vote : artifacts.vote_audit) {
        if (vote.round > 1) {
            CHECK(vote.rationale == VerdictRationale::duplicate_detected);
            CHECK(vote.phi == -1);
        }
    }

    // Only the first submission is confirmed; T strictly decreases after.
    CHECK(artifacts.r_db_size == 1);
    const TrustTrajectory& trajectory = artifacts.trajectories[0];
    REQUIRE(trajectory.series.size() == 4);  // rounds 1, 3, 5, 7 validated
    for (std::size_t i = 1; i < trajectory.series.size(); ++i) {
        CHECK(trajectory.series[i].T_after < trajectory.series[i - 1].T_after);
    }
}

TEST_CASE("bad-mouthing cannot flip decisions but drags scores") {
    ScenarioConfig clean = base_scenario(2024, 10);
    ScenarioConfig attacked = clean;
    attacked.agents[3].behavior.kind = BehaviorKind::bad_mouther;
    attacked.agents[3].behavior.target = "cc1";

    Simulation clean_sim(clean);
    Simulation attacked_sim(attacked);
    const RunArtifacts& clean_art = clean_sim.run();
    const RunArtifacts& attacked_art = attacked_sim.run();

    // One bad-mouther among four cannot block confirmation at q = 0.5.
    CHECK(attacked_art.r_db_size == 10);
    for (const ValidationOutcome& outcome : attacked_sim.chain().outcomes()) {
        CHECK(outcome.decision == 1);
    }

    // Every per-rule trust is strictly lower than in the clean run.
    const TrustTrajectory& clean_t = clean_art.trajectories[0];
    const TrustTrajectory& attacked_t = attacked_art.trajectories[0];
    REQUIRE(clean_t.series.size() == attacked_t.series.size());
    for (std::size_t i = 0; i < clean_t.series.size(); ++i) {
        CHECK(attacked_t.series[i].t < clean_t.series[i].t);
    }
    CHECK(attacked_art.final_T.at("cc1") < clean_art.final_T.at("cc1"));
}

TEST_CASE("whitewashing starts over at zero with independent histories") {
    ScenarioConfig config = base_scenario(808, 8);
    config.agents[4].behavior.kind = BehaviorKind::whitewasher;
    config.agents[4].behavior.rejoin_at = 5;

    Simulation sim(config);
    const RunArtifacts& artifacts = sim.run();

    REQUIRE(artifacts.trajectories.size() == 2);
    const TrustTrajectory& old_identity = artifacts.trajectories[0];
    const TrustTrajectory& new_identity = artifacts.trajectories[1];
    CHECK(old_identity.contributor == "cc1");
    CHECK(new_identity.contributor == "cc1@r5");
    CHECK(old_identity.key_hex != new_identity.key_hex);
    REQUIRE(old_identity.series.size() == 4);
    REQUIRE(new_identity.series.size() == 4);

    // Fresh identity: T restarts from zero, so the first point is exactly
    // (1 - gamma) * t of its own first rule.
    const TrajectoryPoint& first = new_identity.series[0];
    CHECK(first.T_after == doctest::Approx((1.0 - config.trm.gamma) * first.t).epsilon(1e-12));

    // Old record frozen, new record independent.
    ContributorReputation old_rep =
        sim.chain().query_reputation(from_hex(old_identity.key_hex));
    ContributorReputation new_rep =
        sim.chain().query_reputation(from_hex(new_identity.key_hex));
    CHECK(old_rep.m == 4);
    CHECK(new_rep.m == 4);
    CHECK(old_rep.T == old_identity.series.back().T_after);
    CHECK(old_rep.history != new_rep.history);
}

TEST_CASE("txlog round trip: replay, bounds, store audit") {
    fs::path dir = scratch_dir("roundtrip");
    ScenarioConfig config = base_scenario(60601, 6);
    AgentProfile malicious = contributor_agent("cc2", 202, BehaviorKind::always_malicious);
    config.agents.push_back(malicious);  // mix in rejected rules

    Simulation sim(config);
    sim.run();
    sim.write_artifacts(dir.string());

    ParsedLog log = load_log((dir / "txlog.jsonl").string());
    CHECK(replay_and_verify(log) == sim.artifacts().state_hash);
    CHECK(verify_log_bounds(log) > 0);
    CHECK(audit_run_dir(dir.string()) == sim.store().size());

    SUBCASE("tampered vote score breaks replay") {
        ParsedLog tampered = log;
        for (LogRecord& record : tampered.records) {
            auto* tx = std::get_if<ChainTransaction>(&record);
            if (tx != nullptr && tx->kind == TxKind::validation_vote) {
                auto vote = std::get<VotePayload>(tx->payload);
                vote.s = vote.s * 0.5;
                tx->payload = vote;
                break;
            }
        }
        CHECK_THROWS_AS(replay_and_verify(tampered), Error);
    }

    SUBCASE("tampered confirmation breaks the bound audit") {
        ParsedLog tampered = log;
        for (LogRecord& record : tampered.records) {
            auto* tx = std::get_if<ChainTransaction>(&record);
            if (tx != nullptr && tx->kind == TxKind::rule_confirmation) {
                auto conf = std::get<ConfirmationPayload>(tx->payload);
                conf.t += 1e-9;
                tx->payload = conf;
                break;
            }
        }
        CHECK_THROWS_AS(verify_log_bounds(tampered), Error);
    }

    SUBCASE("corrupted bundle fails the store audit") {
        fs::path bundles = dir / "bundles";
        fs::path victim;
        for (const auto& entry : fs::directory_iterator(bundles)) {
            victim = entry.path();
            break;
        }
        REQUIRE_FALSE(victim.empty());
        std::string data = slurp(victim);
        data[data.size() / 2] ^= 0x01;
        std::ofstream out(victim, std::ios::binary | std::ios::trunc);
        out << data;
        out.close();
        CHECK_THROWS_AS(audit_run_dir(dir.string()), Error);
    }
}

TEST_CASE("configuration errors are reported before execution") {
    ScenarioConfig config = base_scenario(1, 5);

    SUBCASE("zero rounds") {
        config.rounds = 0;
        CHECK_THROWS_AS(Simulation{config}, Error);
    }

    SUBCASE("missing corpus") {
        config.corpus_path = repo_dir() + "/no-such-corpus";
        try {
            Simulation sim(config);
            FAIL("expected a config error");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::config);
        }
    }

    SUBCASE("too few validators") {
        config.agents.erase(config.agents.begin());
        CHECK_THROWS_AS(Simulation{config}, Error);
    }

    SUBCASE("bad-mouther without a contributor target") {
        config.agents[0].behavior.kind = BehaviorKind::bad_mouther;
        config.agents[0].behavior.target = "cr1";
        CHECK_THROWS_AS(Simulation{config}, Error);
    }

    SUBCASE("duplicate key seeds") {
        config.agents[1].key_seed = config.agents[0].key_seed;
        CHECK_THROWS_AS(Simulation{config}, Error);
    }
}

TEST_CASE("scenario json parsing") {
    std::string text = R"({
        "seed": 5,
        "trm": {"delta_val": 0.85, "delta_inv": 0.9, "gamma": 0.85,
                 "q_threshold": 0.5, "n_validators": 4},
        "byzantine_budget": 1,
        "rounds": 3,
        "corpus_path": "corpus",
        "regular_threshold": 0.4,
        "agents": [
            {"name": "v1", "role": "validator", "behavior": "honest", "key_seed": 1},
            {"name": "v2", "role": "validator", "behavior": "honest", "key_seed": 2},
            {"name": "v3", "role": "validator", "behavior": "honest", "key_seed": 3},
            {"name": "v4", "role": "validator", "behavior": "always_malicious", "key_seed": 4,
             "score_policy": {"valid": {"kind": "constant", "a": 1.0},
                               "invalid": {"kind": "uniform", "a": 0.45, "b": 0.5}}},
            {"name": "cc", "role": "contributor", "behavior": "turncoat",
             "switch_at": 2, "key_seed": 5}
        ]
    })";
    ScenarioConfig config = ScenarioConfig::from_json_text(text);
    CHECK_NOTHROW(config.validate());
    CHECK(config.byzantine_budget == 1);
    CHECK(config.agents.size() == 5);
    CHECK(config.agents[3].score_policy.invalid.kind == ScoreDist::Kind::uniform);
    CHECK(config.agents[4].behavior.switch_at == 2);

    CHECK_THROWS_AS(ScenarioConfig::from_json_text("{not json"), Error);
    CHECK_THROWS_AS(ScenarioConfig::from_json_text("{\"seed\": 1}"), Error);
    CHECK_THROWS_AS(ScenarioConfig::load(repo_dir() + "/nope.json"), Error);
}
