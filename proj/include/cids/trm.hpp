#pragma once

#include <vector>

#include "cids/bytes.hpp"

namespace cids {

// Weights and thresholds of the trust and reputation mechanism.
struct TrmParams {
    double delta_val = 0.85;  // weight of a valid vote (score >= 0.5)
    double delta_inv = 0.9;   // weight of an invalid vote (score < 0.5)
    double gamma = 0.85;      // decay constant, recent contributions weigh more
    double q_threshold = 0.5; // weighted-majority acceptance threshold
    int n_validators = 4;

    // Throws Error(config) unless 0 < delta_val < delta_inv <= 1,
    // 0 < gamma <= 1, 0 < q_threshold <= 1, and, when byzantine_budget >= 1,
    // n_validators = 3*budget + 1 (>= 4).
    void validate(int byzantine_budget = 0) const;
};

// One validator's verdict on a rule. The vote sign and the score band are
// two encodings of the same judgement: phi = +1 iff s in [0.5, 1],
// phi = -1 iff s in [0, 0.5). Construction rejects mismatched pairs.
struct VoteScore {
    int phi = 0;
    double s = 0.0;
    int validator_index = 0;

    static VoteScore make(int phi, double s, int validator_index);
    static VoteScore from_score(double s, int validator_index);  // derives phi from the band
};

// Aggregated outcome of one rule's validation round.
struct RuleTrust {
    double t = 0.0;     // aggregated rule trust
    int decision = 0;   // +1 accepted, -1 rejected
    int vote_count = 0;
};

// Decayed reputation of a contributor after m validated contributions.
struct ContributorReputation {
    Bytes contributor;
    int m = 0;
    double T = 0.0;
    std::vector<double> history;  // per-rule t values, oldest first
};

// Mean of the scores, each weighted by delta_val or delta_inv according to
// its band. Throws Error(contract) on a wrong vote count and Error(domain)
// on a score outside [0, 1].
double aggregate_rule_trust(const std::vector<VoteScore>& votes, const TrmParams& params);

// Weighted majority: +1 iff mean(s_e * phi_e) >= q_threshold. Equality
// accepts.
int decide_validity(const std::vector<VoteScore>& votes, const TrmParams& params);

// Appends one validated contribution: m grows by one and
// T_new = gamma * T_old + (1 - gamma) * new_t, the O(1) recurrence of the
// decayed sum over the full history.
ContributorReputation update_reputation(const ContributorReputation& current, double new_t,
                                        const TrmParams& params);

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
    bool upper_inclusive = true;
};

// Range of admissible aggregated rule trust values. The upper bound is
// delta_val (inclusive) when delta_inv < 2*delta_val, else delta_inv/2
// (exclusive).
Bounds rule_trust_bounds(const TrmParams& params);

// Range of admissible reputations after m contributions: the rule-trust
// bound scaled by (1 - gamma^m). At m = 0 the range collapses to {0}.
Bounds reputation_bounds(const TrmParams& params, int m);

bool within_bounds(double value, const Bounds& bounds, double tolerance = 0.0);

// Limit form of the reputation under a constant per-rule trust t:
// T_m = (1 - gamma^m) * t.
double closed_form_reputation(double constant_t, double gamma, int m);

}  // namespace cids
