#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "cids/bytes.hpp"
#include "cids/identity.hpp"

namespace cids {

// Normalizes a Snort-like single-line rule: header tokens separated by one
// space, options trimmed and sorted, quoting respected. Idempotent.
// Throws Error(domain) on an empty rule, embedded newlines, an unclosed
// quote or unbalanced parentheses.
std::string canonicalize_rule(std::string_view rule_text);

struct DetectionRule {
    std::string rule_text;
    std::string canonical_form;

    static DetectionRule parse(std::string_view rule_text);
};

// Two rules are duplicates iff their canonical forms are byte-equal.
bool is_duplicate(const DetectionRule& rule, const std::set<std::string>& seen);

enum class Severity { low, medium, high };

const char* to_string(Severity s);
Severity severity_from_string(std::string_view s);  // throws Error(domain)

// IDMEF-inspired rule description. All fields non-empty, values single-line.
struct RuleMetadata {
    std::string classification;
    Severity severity = Severity::medium;
    std::string description;
    std::uint64_t created_at = 0;  // logical timestamp
    std::string analyzer_id;

    void validate() const;  // throws Error(domain)
};

// The unit of storage: a rule, its description and the contributor's
// public key. Serialization is canonical (fixed key order, one field per
// line), so identical bundles serialize to identical bytes and hash to the
// same content address.
struct RuleBundle {
    DetectionRule rule;
    RuleMetadata metadata;
    Bytes contributor;

    Bytes serialize() const;
    static RuleBundle deserialize(const Bytes& data);  // throws Error(domain)
};

enum class Role { validator, contributor, regular };

const char* to_string(Role r);
Role role_from_string(std::string_view s);  // throws Error(domain)

// Registration state shared by the ledger and the store. Mutated only by
// validator-approved registrations; the store consults it for access
// control.
class NodeRegistry {
public:
    struct Entry {
        Role role = Role::regular;
        bool subscribed = false;
    };

    void add(const Bytes& public_key, Role role, bool subscribed = true);
    bool is_registered(const Bytes& public_key) const;
    bool is_subscribed(const Bytes& public_key) const;
    Role role_of(const Bytes& public_key) const;  // throws Error(not_found)

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    std::map<std::string, Entry> entries_;  // hex public key -> entry
};

// Content-addressed, append-only bundle store. put requires a registered
// caller, get a subscribed one.
class RuleStore {
public:
    explicit RuleStore(const NodeRegistry& registry) : registry_(&registry) {}

    // Returns the bundle's content address; re-putting the same bytes is a
    // no-op returning the same address. Throws Error(auth) for an
    // unregistered caller.
    ContentAddress put_bundle(const RuleBundle& bundle, const Bytes& caller);

    // Throws Error(auth) for an unsubscribed caller, Error(not_found) for
    // an unknown address.
    RuleBundle get_bundle(const ContentAddress& address, const Bytes& caller) const;

    bool contains(const ContentAddress& address) const;
    std::size_t size() const { return catalog_.size(); }

    // Re-hashes every stored bundle against its catalogue key. Throws
    // Error(invariant) on any mismatch.
    void audit() const;

    const std::map<std::string, Bytes>& catalog() const { return catalog_; }

private:
    const NodeRegistry* registry_;
    std::map<std::string, Bytes> catalog_;  // address hex -> serialized bundle
};

}  // namespace cids
