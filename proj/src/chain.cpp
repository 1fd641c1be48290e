#include "cids/chain.hpp"

#include <algorithm>

#include "cids/errors.hpp"

namespace cids {

const char* to_string(TxKind k) {
    switch (k) {
        case TxKind::rule_submission: return "tx_r";
        case TxKind::validation_vote: return "tx_c";
        case TxKind::rule_confirmation: return "tx_f";
    }
    return "tx_r";
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::new_rule_for_validation: return "new_rule_for_validation";
        case EventKind::rule_confirmed: return "rule_confirmed";
    }
    return "new_rule_for_validation";
}

const char* to_string(RejectCode c) {
    switch (c) {
        case RejectCode::none: return "none";
        case RejectCode::auth: return "rejected-auth";
        case RejectCode::duplicate: return "rejected-duplicate";
        case RejectCode::missing_bundle: return "rejected-missing-bundle";
        case RejectCode::missing_rule: return "rejected-missing";
        case RejectCode::double_vote: return "rejected-double-vote";
        case RejectCode::known_identity: return "rejected-known-identity";
        case RejectCode::invalid_payload: return "rejected-invalid-payload";
    }
    return "none";
}

Bytes ChainTransaction::signing_payload() const {
    PayloadWriter w;
    if (const auto* sub = std::get_if<RuleSubmissionPayload>(&payload)) {
        w.field(Bytes(sub->address.digest.begin(), sub->address.digest.end()));
    } else if (const auto* vote = std::get_if<VotePayload>(&payload)) {
        w.field(static_cast<std::int64_t>(vote->phi));
        w.field(vote->s);
        w.field(Bytes(vote->rule_address.digest.begin(), vote->rule_address.digest.end()));
    } else if (const auto* conf = std::get_if<ConfirmationPayload>(&payload)) {
        w.field(Bytes(conf->address.digest.begin(), conf->address.digest.end()));
        w.field(conf->t);
    }
    w.field(timestamp);
    return w.bytes();
}

ChainTransaction ChainTransaction::make_submission(const NodeKeyPair& sender,
                                                   const ContentAddress& address,
                                                   std::uint64_t timestamp) {
    ChainTransaction tx;
    tx.kind = TxKind::rule_submission;
    tx.payload = RuleSubmissionPayload{address};
    tx.timestamp = timestamp;
    tx.sender = sender.public_key;
    tx.signature = sign_message(sender, tx.signing_payload());
    return tx;
}

ChainTransaction ChainTransaction::make_vote(const NodeKeyPair& sender, int phi, double s,
                                             const ContentAddress& rule_address,
                                             std::uint64_t timestamp) {
    ChainTransaction tx;
    tx.kind = TxKind::validation_vote;
    tx.payload = VotePayload{phi, s, rule_address};
    tx.timestamp = timestamp;
    tx.sender = sender.public_key;
    tx.signature = sign_message(sender, tx.signing_payload());
    return tx;
}

Bytes RegistrationRequest::signing_payload() const {
    PayloadWriter w;
    w.field(public_key);
    w.field(attributes);
    w.field(std::string_view(to_string(role)));
    w.field(timestamp);
    return w.bytes();
}

RegistrationRequest RegistrationRequest::make(const NodeKeyPair& key, const std::string& attributes,
                                              Role role, std::uint64_t timestamp) {
    RegistrationRequest req;
    req.public_key = key.public_key;
    req.attributes = attributes;
    req.role = role;
    req.timestamp = timestamp;
    req.signature = sign_message(key, req.signing_payload());
    return req;
}

void GenesisConfig::validate() const {
    trm.validate(byzantine_budget);
    if (static_cast<int>(validators.size()) != trm.n_validators) {
        throw Error(ErrorCategory::config, "genesis validator count must equal n_validators");
    }
    for (std::size_t i = 0; i < validators.size(); ++i) {
        for (std::size_t j = i + 1; j < validators.size(); ++j) {
            if (validators[i] == validators[j]) {
                throw Error(ErrorCategory::config, "genesis validator keys must be distinct");
            }
        }
    }
}

Chain::Chain(GenesisConfig genesis, NodeRegistry& registry, BundleExists bundle_exists)
    : genesis_(std::move(genesis)), registry_(&registry), bundle_exists_(std::move(bundle_exists)) {
    genesis_.validate();
    for (const Bytes& key : genesis_.validators) {
        registry_->add(key, Role::validator);
    }
}

int Chain::validator_index_of(const Bytes& key) const {
    for (std::size_t i = 0; i < genesis_.validators.size(); ++i) {
        if (genesis_.validators[i] == key) return static_cast<int>(i);
    }
    return -1;
}

bool Chain::is_validator(const Bytes& key) const { return validator_index_of(key) >= 0; }

RegistrationResponse Chain::register_node(const RegistrationRequest& request,
                                          const Bytes& approver) {
    RegistrationResponse response;
    if (!is_validator(approver)) {
        response.reject = RejectCode::auth;
        return response;
    }
    if (!verify_signature(request.public_key, request.signing_payload(), request.signature)) {
        response.reject = RejectCode::auth;
        return response;
    }
    if (request.role == Role::validator) {
        // The validator set is fixed at genesis.
        response.reject = RejectCode::invalid_payload;
        return response;
    }
    if (registry_->is_registered(request.public_key)) {
        response.reject = RejectCode::known_identity;
        return response;
    }

    registry_->add(request.public_key, request.role);
    if (request.role == Role::contributor) {
        ContributorReputation rep;
        rep.contributor = request.public_key;
        reputations_[to_hex(request.public_key)] = std::move(rep);
    }
    log_.push_back(RegistrationRecord{request, approver});
    ++clock_;

    response.accepted = true;
    response.storage_handle = "sim://storage/bootstrap";
    response.trm_contract = "sim://contract/trm";
    response.str_contract = "sim://contract/str";
    return response;
}

SubmitResult Chain::submit_rule(const ChainTransaction& tx) {
    SubmitResult result;
    const auto* payload = std::get_if<RuleSubmissionPayload>(&tx.payload);
    if (tx.kind != TxKind::rule_submission || payload == nullptr) {
        result.reject = RejectCode::invalid_payload;
        return result;
    }
    if (!verify_signature(tx.sender, tx.signing_payload(), tx.signature)) {
        result.reject = RejectCode::auth;
        return result;
    }
    if (!registry_->is_registered(tx.sender) || registry_->role_of(tx.sender) != Role::contributor) {
        result.reject = RejectCode::auth;
        return result;
    }
    if (bundle_exists_ && !bundle_exists_(payload->address)) {
        result.reject = RejectCode::missing_bundle;
        return result;
    }
    std::string hex = payload->address.hex();
    if (pending_.count(hex) > 0 || r_db_.count(hex) > 0) {
        result.reject = RejectCode::duplicate;
        return result;
    }

    PendingRule pending;
    pending.contributor = tx.sender;
    pending.submitted_at = clock_;
    pending_[hex] = std::move(pending);
    log_.push_back(tx);
    ++clock_;

    ChainEvent ev{EventKind::new_rule_for_validation, payload->address, clock_, next_event_seq_++};
    events_.push_back(ev);
    result.accepted = true;
    result.events.push_back(ev);
    return result;
}

SubmitResult Chain::submit_vote(const ChainTransaction& tx) {
    SubmitResult result;
    const auto* payload = std::get_if<VotePayload>(&tx.payload);
    if (tx.kind != TxKind::validation_vote || payload == nullptr) {
        result.reject = RejectCode::invalid_payload;
        return result;
    }
    int index = validator_index_of(tx.sender);
    if (index < 0) {
        result.reject = RejectCode::auth;
        return result;
    }
    if (!verify_signature(tx.sender, tx.signing_payload(), tx.signature)) {
        result.reject = RejectCode::auth;
        return result;
    }
    std::string hex = payload->rule_address.hex();
    auto it = pending_.find(hex);
    if (it == pending_.end()) {
        result.reject = RejectCode::missing_rule;
        return result;
    }
    std::string sender_hex = to_hex(tx.sender);
    if (it->second.votes.count(sender_hex) > 0) {
        result.reject = RejectCode::double_vote;
        return result;
    }
    VoteScore vote;
    try {
        vote = VoteScore::make(payload->phi, payload->s, index);
    } catch (const Error&) {
        result.reject = RejectCode::invalid_payload;
        return result;
    }

    it->second.votes.emplace(sender_hex, vote);
    log_.push_back(tx);
    ++clock_;

    if (static_cast<int>(it->second.votes.size()) == genesis_.trm.n_validators) {
        finalize_rule(hex, result.events);
    } else {
        it->second.r_count = static_cast<int>(it->second.votes.size());
    }
    result.accepted = true;
    return result;
}

void Chain::finalize_rule(const std::string& address_hex, std::vector<ChainEvent>& events) {
    PendingRule pending = std::move(pending_.at(address_hex));
    pending_.erase(address_hex);

    std::vector<VoteScore> votes;
    votes.reserve(pending.votes.size());
    for (const auto& [key, vote] : pending.votes) votes.push_back(vote);
    std::sort(votes.begin(), votes.end(),
              [](const VoteScore& a, const VoteScore& b) { return a.validator_index < b.validator_index; });

    ContentAddress address = ContentAddress::from_hex(address_hex);
    double t = aggregate_rule_trust(votes, genesis_.trm);
    int decision = decide_validity(votes, genesis_.trm);

    // Reputation moves for accepted and rejected rules alike.
    std::string contributor_hex = to_hex(pending.contributor);
    auto rep_it = reputations_.find(contributor_hex);
    if (rep_it == reputations_.end()) {
        throw Error(ErrorCategory::invariant, "pending rule from unknown contributor");
    }
    rep_it->second = update_reputation(rep_it->second, t, genesis_.trm);

    rule_trusts_[address_hex] = RuleTrust{t, decision, static_cast<int>(votes.size())};
    outcomes_.push_back(
        ValidationOutcome{address, pending.contributor, votes, t, decision, clock_});

    if (decision == 1) {
        ChainTransaction confirmation;
        confirmation.kind = TxKind::rule_confirmation;
        confirmation.payload = ConfirmationPayload{address, t};
        confirmation.timestamp = clock_;
        log_.push_back(confirmation);
        ++clock_;

        r_db_[address_hex] = t;
        ChainEvent ev{EventKind::rule_confirmed, address, clock_, next_event_seq_++};
        events_.push_back(ev);
        events.push_back(ev);
    }
}

RuleTrust Chain::query_rule_trust(const ContentAddress& address) const {
    const RuleTrust* found = find_rule_trust(address);
    if (found == nullptr) {
        throw Error(ErrorCategory::not_found, "no validated rule at " + address.hex());
    }
    return *found;
}

ContributorReputation Chain::query_reputation(const Bytes& contributor) const {
    const ContributorReputation* found = find_reputation(contributor);
    if (found == nullptr) {
        throw Error(ErrorCategory::not_found, "unknown contributor " + to_hex(contributor));
    }
    return *found;
}

const RuleTrust* Chain::find_rule_trust(const ContentAddress& address) const {
    auto it = rule_trusts_.find(address.hex());
    return it == rule_trusts_.end() ? nullptr : &it->second;
}

const ContributorReputation* Chain::find_reputation(const Bytes& contributor) const {
    auto it = reputations_.find(to_hex(contributor));
    return it == reputations_.end() ? nullptr : &it->second;
}

std::string Chain::state_hash() const {
    PayloadWriter w;
    w.field(genesis_.trm.delta_val);
    w.field(genesis_.trm.delta_inv);
    w.field(genesis_.trm.gamma);
    w.field(genesis_.trm.q_threshold);
    w.field(static_cast<std::int64_t>(genesis_.trm.n_validators));
    w.field(static_cast<std::int64_t>(genesis_.byzantine_budget));
    for (const Bytes& key : genesis_.validators) w.field(key);

    for (const auto& [key, entry] : registry_->entries()) {
        w.field(std::string_view(key));
        w.field(std::string_view(to_string(entry.role)));
        w.field(static_cast<std::uint64_t>(entry.subscribed ? 1 : 0));
    }
    for (const auto& [key, pending] : pending_) {
        w.field(std::string_view(key));
        w.field(pending.contributor);
        w.field(pending.submitted_at);
        w.field(static_cast<std::int64_t>(pending.r_count));
        for (const auto& [voter, vote] : pending.votes) {
            w.field(std::string_view(voter));
            w.field(static_cast<std::int64_t>(vote.phi));
            w.field(vote.s);
            w.field(static_cast<std::int64_t>(vote.validator_index));
        }
    }
    for (const auto& [key, rep] : reputations_) {
        w.field(std::string_view(key));
        w.field(static_cast<std::int64_t>(rep.m));
        w.field(rep.T);
        for (double t : rep.history) w.field(t);
    }
    for (const auto& [key, trust] : rule_trusts_) {
        w.field(std::string_view(key));
        w.field(trust.t);
        w.field(static_cast<std::int64_t>(trust.decision));
        w.field(static_cast<std::int64_t>(trust.vote_count));
    }
    for (const auto& [key, t] : r_db_) {
        w.field(std::string_view(key));
        w.field(t);
    }
    for (const ChainEvent& ev : events_) {
        w.field(std::string_view(to_string(ev.kind)));
        w.field(Bytes(ev.rule_address.digest.begin(), ev.rule_address.digest.end()));
        w.field(ev.emitted_at);
        w.field(ev.sequence);
    }
    w.field(clock_);
    return to_hex(sha256(w.bytes()));
}

Chain replay_log(const GenesisConfig& genesis, const std::vector<LogRecord>& records,
                 NodeRegistry& registry) {
    // Bundle existence was checked when the log was produced; accepted
    // records are replayed as-is.
    Chain chain(genesis, registry, [](const ContentAddress&) { return true; });
    for (const LogRecord& record : records) {
        if (const auto* reg = std::get_if<RegistrationRecord>(&record)) {
            RegistrationResponse response = chain.register_node(reg->request, reg->approver);
            if (!response.accepted) {
                throw Error(ErrorCategory::invariant,
                            std::string("replay: registration rejected: ") +
                                to_string(response.reject));
            }
            continue;
        }
        const auto& tx = std::get<ChainTransaction>(record);
        switch (tx.kind) {
            case TxKind::rule_submission: {
                SubmitResult r = chain.submit_rule(tx);
                if (!r.accepted) {
                    throw Error(ErrorCategory::invariant,
                                std::string("replay: submission rejected: ") + to_string(r.reject));
                }
                break;
            }
            case TxKind::validation_vote: {
                SubmitResult r = chain.submit_vote(tx);
                if (!r.accepted) {
                    throw Error(ErrorCategory::invariant,
                                std::string("replay: vote rejected: ") + to_string(r.reject));
                }
                break;
            }
            case TxKind::rule_confirmation:
                // Regenerated by the fold; verified against the rebuilt log
                // below.
                break;
        }
    }
    if (chain.log().size() != records.size()) {
        throw Error(ErrorCategory::invariant, "replay: rebuilt log length differs from input");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!(chain.log()[i] == records[i])) {
            throw Error(ErrorCategory::invariant,
                        "replay: rebuilt log diverges at record " + std::to_string(i));
        }
    }
    return chain;
}

}  // namespace cids
