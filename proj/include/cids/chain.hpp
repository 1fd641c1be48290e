#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cids/bytes.hpp"
#include "cids/identity.hpp"
#include "cids/rulestore.hpp"
#include "cids/trm.hpp"

namespace cids {

enum class TxKind { rule_submission, validation_vote, rule_confirmation };

const char* to_string(TxKind k);

struct RuleSubmissionPayload {
    ContentAddress address;
    bool operator==(const RuleSubmissionPayload&) const = default;
};

struct VotePayload {
    int phi = 0;
    double s = 0.0;
    ContentAddress rule_address;
    bool operator==(const VotePayload&) const = default;
};

struct ConfirmationPayload {
    ContentAddress address;
    double t = 0.0;
    bool operator==(const ConfirmationPayload&) const = default;
};

using TxPayload = std::variant<RuleSubmissionPayload, VotePayload, ConfirmationPayload>;

// One ledger transaction. Confirmations are contract-originated: their
// sender and signature are empty.
struct ChainTransaction {
    TxKind kind = TxKind::rule_submission;
    TxPayload payload;
    std::uint64_t timestamp = 0;
    Bytes signature;
    Bytes sender;

    // Canonical bytes covered by the signature (payload fields in declared
    // order, then the timestamp).
    Bytes signing_payload() const;

    static ChainTransaction make_submission(const NodeKeyPair& sender, const ContentAddress& address,
                                            std::uint64_t timestamp);
    static ChainTransaction make_vote(const NodeKeyPair& sender, int phi, double s,
                                      const ContentAddress& rule_address, std::uint64_t timestamp);

    bool operator==(const ChainTransaction&) const = default;
};

enum class EventKind { new_rule_for_validation, rule_confirmed };

const char* to_string(EventKind k);

struct ChainEvent {
    EventKind kind = EventKind::new_rule_for_validation;
    ContentAddress rule_address;
    std::uint64_t emitted_at = 0;
    std::uint64_t sequence = 0;

    bool operator==(const ChainEvent&) const = default;
};

enum class RejectCode {
    none,
    auth,             // bad signature, unregistered sender, wrong role
    duplicate,        // rule address already pending or confirmed
    missing_bundle,   // submitted address not present in the store
    missing_rule,     // vote on a rule that is not pending
    double_vote,      // validator already voted on this rule
    known_identity,   // registration replay with an existing key
    invalid_payload,  // malformed payload (e.g. vote sign/band mismatch)
};

const char* to_string(RejectCode c);

struct SubmitResult {
    bool accepted = false;
    RejectCode reject = RejectCode::none;
    std::vector<ChainEvent> events;
};

struct RegistrationRequest {
    Bytes public_key;
    std::string attributes;  // IP address, unique identifier
    Role role = Role::regular;
    std::uint64_t timestamp = 0;
    Bytes signature;

    Bytes signing_payload() const;
    static RegistrationRequest make(const NodeKeyPair& key, const std::string& attributes,
                                    Role role, std::uint64_t timestamp);

    bool operator==(const RegistrationRequest&) const = default;
};

struct RegistrationResponse {
    bool accepted = false;
    RejectCode reject = RejectCode::none;
    std::string storage_handle;
    std::string trm_contract;
    std::string str_contract;
};

struct RegistrationRecord {
    RegistrationRequest request;
    Bytes approver;

    bool operator==(const RegistrationRecord&) const = default;
};

// The ledger's append-only history: approved registrations and applied
// transactions, in application order.
using LogRecord = std::variant<RegistrationRecord, ChainTransaction>;

struct PendingRule {
    Bytes contributor;
    std::uint64_t submitted_at = 0;
    std::map<std::string, VoteScore> votes;  // validator key hex -> vote
    int r_count = 0;                         // votes received while still pending
};

// Full record of one completed validation round, in decision order.
struct ValidationOutcome {
    ContentAddress address;
    Bytes contributor;
    std::vector<VoteScore> votes;  // ordered by validator index
    double t = 0.0;
    int decision = 0;
    std::uint64_t decided_at = 0;
};

struct GenesisConfig {
    TrmParams trm;
    int byzantine_budget = 0;
    std::vector<Bytes> validators;

    void validate() const;  // throws Error(config)
};

// Simulated permissioned ledger hosting the trust-management and storage
// contracts. Transactions are applied one at a time in submission order
// under a logical clock; every applied record is appended to the log, and
// replaying the log from genesis reproduces the state bit-for-bit.
class Chain {
public:
    using BundleExists = std::function<bool(const ContentAddress&)>;

    // The registry is shared with the rule store; genesis validators are
    // registered immediately. bundle_exists answers whether a submitted
    // address is retrievable (bound to the store in a live run, to a
    // constant true during log replay).
    Chain(GenesisConfig genesis, NodeRegistry& registry, BundleExists bundle_exists);

    RegistrationResponse register_node(const RegistrationRequest& request, const Bytes& approver);

    SubmitResult submit_rule(const ChainTransaction& tx);
    SubmitResult submit_vote(const ChainTransaction& tx);

    // Read-only snapshots; throw Error(not_found) for unknown subjects.
    RuleTrust query_rule_trust(const ContentAddress& address) const;
    ContributorReputation query_reputation(const Bytes& contributor) const;

    const RuleTrust* find_rule_trust(const ContentAddress& address) const;
    const ContributorReputation* find_reputation(const Bytes& contributor) const;

    bool is_validator(const Bytes& key) const;
    std::uint64_t now() const { return clock_; }

    const GenesisConfig& genesis() const { return genesis_; }
    const std::vector<LogRecord>& log() const { return log_; }
    const std::vector<ChainEvent>& events() const { return events_; }
    const std::vector<ValidationOutcome>& outcomes() const { return outcomes_; }
    const std::map<std::string, PendingRule>& pending_rules() const { return pending_; }
    const std::map<std::string, ContributorReputation>& reputations() const { return reputations_; }
    const std::map<std::string, RuleTrust>& rule_trusts() const { return rule_trusts_; }
    const std::map<std::string, double>& r_db() const { return r_db_; }

    // Hash over the complete ledger state (doubles as bit patterns), used
    // by the replay check.
    std::string state_hash() const;

private:
    int validator_index_of(const Bytes& key) const;  // -1 when not a validator
    void finalize_rule(const std::string& address_hex, std::vector<ChainEvent>& events);

    GenesisConfig genesis_;
    NodeRegistry* registry_;
    BundleExists bundle_exists_;

    std::uint64_t clock_ = 0;
    std::uint64_t next_event_seq_ = 0;

    std::vector<LogRecord> log_;
    std::vector<ChainEvent> events_;
    std::vector<ValidationOutcome> outcomes_;

    std::map<std::string, PendingRule> pending_;
    std::map<std::string, ContributorReputation> reputations_;
    std::map<std::string, RuleTrust> rule_trusts_;
    std::map<std::string, double> r_db_;
};

// Rebuilds a chain by folding `records` from genesis. Confirmation records
// in the input are not re-applied (the fold regenerates them); the rebuilt
// log must match the input record-for-record or Error(invariant) is
// thrown. Registrations and transactions must all be accepted.
Chain replay_log(const GenesisConfig& genesis, const std::vector<LogRecord>& records,
                 NodeRegistry& registry);

}  // namespace cids
