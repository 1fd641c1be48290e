#include "cids/trm.hpp"

#include <cmath>
#include <string>

#include "cids/errors.hpp"

namespace cids {

void TrmParams::validate(int byzantine_budget) const {
    if (!(delta_val > 0.0 && delta_val < delta_inv && delta_inv <= 1.0)) {
        throw Error(ErrorCategory::config,
                    "trm params require 0 < delta_val < delta_inv <= 1");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw Error(ErrorCategory::config, "trm params require 0 < gamma <= 1");
    }
    if (!(q_threshold > 0.0 && q_threshold <= 1.0)) {
        throw Error(ErrorCategory::config, "trm params require 0 < q_threshold <= 1");
    }
    if (n_validators < 1) {
        throw Error(ErrorCategory::config, "trm params require n_validators >= 1");
    }
    if (byzantine_budget >= 1) {
        if (n_validators < 4 || n_validators != 3 * byzantine_budget + 1) {
            throw Error(ErrorCategory::config,
                        "byzantine tolerance needs n_validators = 3*budget + 1, >= 4");
        }
    }
}

VoteScore VoteScore::make(int phi, double s, int validator_index) {
    if (phi != 1 && phi != -1) {
        throw Error(ErrorCategory::domain, "vote phi must be +1 or -1");
    }
    if (!(s >= 0.0 && s <= 1.0)) {
        throw Error(ErrorCategory::domain, "vote score must lie in [0, 1]");
    }
    bool band_valid = s >= 0.5;
    if ((phi == 1) != band_valid) {
        throw Error(ErrorCategory::domain,
                    "vote sign and score band disagree: phi=+1 needs s in [0.5,1], "
                    "phi=-1 needs s in [0,0.5)");
    }
    return VoteScore{phi, s, validator_index};
}

VoteScore VoteScore::from_score(double s, int validator_index) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw Error(ErrorCategory::domain, "vote score must lie in [0, 1]");
    }
    return VoteScore{s >= 0.5 ? 1 : -1, s, validator_index};
}

namespace {

void check_votes(const std::vector<VoteScore>& votes, const TrmParams& params) {
    if (static_cast<int>(votes.size()) != params.n_validators) {
        throw Error(ErrorCategory::contract,
                    "expected " + std::to_string(params.n_validators) + " votes, got " +
                        std::to_string(votes.size()));
    }
    for (const VoteScore& v : votes) {
        if (!(v.s >= 0.0 && v.s <= 1.0)) {
            throw Error(ErrorCategory::domain, "vote score outside [0, 1]");
        }
    }
}

}  // namespace

double aggregate_rule_trust(const std::vector<VoteScore>& votes, const TrmParams& params) {
    check_votes(votes, params);
    double sum = 0.0;
    for (const VoteScore& v : votes) {
        double delta = v.s >= 0.5 ? params.delta_val : params.delta_inv;
        sum += v.s * delta;
    }
    return sum / static_cast<double>(params.n_validators);
}

int decide_validity(const std::vector<VoteScore>& votes, const TrmParams& params) {
    check_votes(votes, params);
    double sum = 0.0;
    for (const VoteScore& v : votes) {
        sum += v.s * static_cast<double>(v.phi);
    }
    double mean = sum / static_cast<double>(params.n_validators);
    return mean >= params.q_threshold ? 1 : -1;
}

ContributorReputation update_reputation(const ContributorReputation& current, double new_t,
                                        const TrmParams& params) {
    Bounds t_bounds = rule_trust_bounds(params);
    if (!within_bounds(new_t, t_bounds, 1e-12)) {
        throw Error(ErrorCategory::domain, "rule trust value outside admissible bounds");
    }
    ContributorReputation next = current;
    next.m = current.m + 1;
    next.T = params.gamma * current.T + (1.0 - params.gamma) * new_t;
    next.history.push_back(new_t);
    return next;
}

Bounds rule_trust_bounds(const TrmParams& params) {
    if (params.delta_inv < 2.0 * params.delta_val) {
        return Bounds{0.0, params.delta_val, true};
    }
    return Bounds{0.0, params.delta_inv / 2.0, false};
}

Bounds reputation_bounds(const TrmParams& params, int m) {
    if (m < 0) {
        throw Error(ErrorCategory::domain, "contribution count must be non-negative");
    }
    double scale = 1.0 - std::pow(params.gamma, static_cast<double>(m));
    Bounds rule = rule_trust_bounds(params);
    // At m = 0 both branches collapse to {0}; T = 0 is the defined start.
    bool inclusive = rule.upper_inclusive || m == 0;
    return Bounds{0.0, scale * rule.upper, inclusive};
}

bool within_bounds(double value, const Bounds& bounds, double tolerance) {
    if (value < bounds.lower - tolerance) return false;
    if (bounds.upper_inclusive) return value <= bounds.upper + tolerance;
    return value < bounds.upper + tolerance;
}

double closed_form_reputation(double constant_t, double gamma, int m) {
    return (1.0 - std::pow(gamma, static_cast<double>(m))) * constant_t;
}

}  // namespace cids
