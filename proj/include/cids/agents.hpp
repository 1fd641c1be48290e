#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cids/chain.hpp"
#include "cids/identity.hpp"
#include "cids/rulestore.hpp"

namespace cids {

enum class BehaviorKind {
    honest,
    turncoat,          // valid rules until switch_at, invalid afterwards
    always_malicious,  // contributor: invalid rules; validator: inverted votes
    self_promoter,     // honest submissions plus a vote attempt on its own rule
    bad_mouther,       // validator: negative votes against one target contributor
    ballot_stuffer,    // resubmits its first rule, verbatim or cosmetically altered
    whitewasher,       // malicious, then re-registers under a fresh key at rejoin_at
};

const char* to_string(BehaviorKind k);
BehaviorKind behavior_from_string(std::string_view s);  // throws Error(config)

struct Behavior {
    BehaviorKind kind = BehaviorKind::honest;
    int switch_at = 0;       // turncoat
    int rejoin_at = 0;       // whitewasher
    std::string target;      // bad_mouther: agent name of the victim
};

// Score distribution, drawn via a fixed 53-bit mantissa mapping so results
// are identical across standard library implementations.
struct ScoreDist {
    enum class Kind { constant, uniform };
    Kind kind = Kind::constant;
    double a = 1.0;
    double b = 1.0;  // uniform draws from [a, b)

    double draw(std::mt19937_64& rng) const;
};

// Per-verdict score bands: `valid` must stay within [0.5, 1], `invalid`
// within [0, 0.5).
struct ScorePolicy {
    ScoreDist valid{ScoreDist::Kind::uniform, 0.9, 1.0};
    ScoreDist invalid{ScoreDist::Kind::uniform, 0.0, 0.1};

    void validate() const;  // throws Error(config)
};

struct AgentProfile {
    std::string name;
    Role role = Role::regular;
    Behavior behavior;
    ScorePolicy score_policy;     // validators only
    std::uint64_t key_seed = 0;
};

enum class VerdictRationale {
    matches_ground_truth,
    contradicts_ground_truth,
    duplicate_detected,
    adversarial_override,
};

const char* to_string(VerdictRationale r);

struct ValidationVerdict {
    int phi = 0;
    double s = 0.0;
    VerdictRationale rationale = VerdictRationale::matches_ground_truth;
};

// A contributor's private slice of the fixture corpus. Draws are
// sequential; running out is a scenario configuration error.
class CorpusSlice {
public:
    CorpusSlice() = default;
    explicit CorpusSlice(std::vector<std::string> rule_texts) : texts_(std::move(rule_texts)) {}

    const std::string& next();  // throws Error(config) when exhausted
    std::size_t remaining() const { return texts_.size() - next_; }

private:
    std::vector<std::string> texts_;
    std::size_t next_ = 0;
};

class ContributorAgent {
public:
    ContributorAgent(AgentProfile profile, NodeKeyPair key, CorpusSlice valid_rules,
                     CorpusSlice invalid_rules, std::uint64_t rng_seed);

    // Produces this round's submission, or nothing when the behaviour sits
    // the round out. `now` stamps the bundle metadata.
    std::optional<RuleBundle> step(int round, std::uint64_t now);

    // Whitewashing: true when the agent discards its identity this round.
    bool wants_rejoin(int round) const;
    void adopt_identity(NodeKeyPair fresh_key, std::string fresh_label);

    const AgentProfile& profile() const { return profile_; }
    const NodeKeyPair& key() const { return key_; }
    const std::string& label() const { return label_; }

private:
    RuleBundle build_bundle(const std::string& rule_text, std::uint64_t now) const;

    AgentProfile profile_;
    NodeKeyPair key_;
    std::string label_;
    CorpusSlice valid_;
    CorpusSlice invalid_;
    std::optional<RuleBundle> first_bundle_;  // ballot stuffer's replay material
    std::mt19937_64 rng_;
};

class ValidatorAgent {
public:
    ValidatorAgent(AgentProfile profile, NodeKeyPair key, int validator_index,
                   std::set<std::string> ground_truth, std::uint64_t rng_seed);

    ValidationVerdict verdict(const RuleBundle& bundle);

    void set_target_key(Bytes target) { target_key_ = std::move(target); }

    const AgentProfile& profile() const { return profile_; }
    const NodeKeyPair& key() const { return key_; }
    int index() const { return index_; }
    const std::set<std::string>& seen() const { return seen_; }

private:
    AgentProfile profile_;
    NodeKeyPair key_;
    int index_ = 0;
    std::set<std::string> ground_truth_;  // canonical forms of corpus-valid rules
    std::set<std::string> seen_;          // canonical forms already validated
    Bytes target_key_;
    std::mt19937_64 rng_;
};

class RegularAgent {
public:
    enum class UpdateStatus { included, excluded, retrieval_failed };

    RegularAgent(AgentProfile profile, NodeKeyPair key, double threshold);

    // Reacts to a rule-confirmed event: retrieves the bundle and includes
    // the rule in R_loc iff both the rule trust and the contributor
    // reputation clear the local threshold.
    UpdateStatus on_confirmed(const ChainEvent& event, const Chain& chain, const RuleStore& store);

    const AgentProfile& profile() const { return profile_; }
    const NodeKeyPair& key() const { return key_; }
    const std::set<std::string>& local_rules() const { return r_loc_; }

private:
    AgentProfile profile_;
    NodeKeyPair key_;
    double threshold_ = 0.5;
    std::set<std::string> r_loc_;
};

}  // namespace cids
