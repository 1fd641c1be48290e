#include "cids/rulestore.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <vector>

#include "cids/errors.hpp"

namespace cids {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Splits on `sep` at quote depth zero. A backslash escapes the next
// character inside quotes.
std::vector<std::string> split_outside_quotes(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::string current;
    bool in_quotes = false;
    bool escaped = false;
    for (char c : s) {
        if (escaped) {
            current.push_back(c);
            escaped = false;
            continue;
        }
        if (in_quotes && c == '\\') {
            current.push_back(c);
            escaped = true;
            continue;
        }
        if (c == '"') {
            in_quotes = !in_quotes;
            current.push_back(c);
            continue;
        }
        if (c == sep && !in_quotes) {
            parts.push_back(current);
            current.clear();
            continue;
        }
        current.push_back(c);
    }
    if (in_quotes) {
        throw Error(ErrorCategory::domain, "rule has an unterminated quoted string");
    }
    parts.push_back(current);
    return parts;
}

std::string normalize_option(const std::string& raw) {
    // Key and value are trimmed around the first ':' outside quotes.
    bool in_quotes = false;
    bool escaped = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (escaped) {
            escaped = false;
            continue;
        }
        if (in_quotes && c == '\\') {
            escaped = true;
            continue;
        }
        if (c == '"') {
            in_quotes = !in_quotes;
            continue;
        }
        if (c == ':' && !in_quotes) {
            return trim(raw.substr(0, i)) + ":" + trim(raw.substr(i + 1));
        }
    }
    return trim(raw);
}

}  // namespace

std::string canonicalize_rule(std::string_view rule_text) {
    if (rule_text.find('\n') != std::string_view::npos ||
        rule_text.find('\r') != std::string_view::npos) {
        throw Error(ErrorCategory::domain, "rule must be a single line");
    }
    std::string text = trim(rule_text);
    if (text.empty()) {
        throw Error(ErrorCategory::domain, "rule is empty");
    }

    // Locate the options section: first '(' outside quotes.
    std::size_t open = std::string::npos;
    {
        bool in_quotes = false;
        bool escaped = false;
        for (std::size_t i = 0; i < text.size(); ++i) {
            char c = text[i];
            if (escaped) {
                escaped = false;
                continue;
            }
            if (in_quotes && c == '\\') {
                escaped = true;
                continue;
            }
            if (c == '"') {
                in_quotes = !in_quotes;
                continue;
            }
            if (c == '(' && !in_quotes) {
                open = i;
                break;
            }
        }
    }

    std::string header_part = open == std::string::npos ? text : text.substr(0, open);
    std::string options_part;
    if (open != std::string::npos) {
        std::string rest = trim(text.substr(open));
        if (rest.size() < 2 || rest.back() != ')') {
            throw Error(ErrorCategory::domain, "rule options are not closed with ')'");
        }
        options_part = rest.substr(1, rest.size() - 2);
    }

    std::istringstream header_stream(header_part);
    std::vector<std::string> tokens;
    for (std::string tok; header_stream >> tok;) {
        tokens.push_back(tok);
    }
    if (tokens.empty()) {
        throw Error(ErrorCategory::domain, "rule has no header tokens");
    }

    std::string canonical;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) canonical.push_back(' ');
        canonical += tokens[i];
    }

    if (open != std::string::npos) {
        std::vector<std::string> options;
        for (const std::string& piece : split_outside_quotes(options_part, ';')) {
            std::string opt = normalize_option(piece);
            if (!opt.empty()) {
                options.push_back(std::move(opt));
            }
        }
        std::sort(options.begin(), options.end());
        canonical += " (";
        for (std::size_t i = 0; i < options.size(); ++i) {
            if (i) canonical += "; ";
            canonical += options[i];
        }
        canonical += ")";
    }
    return canonical;
}

DetectionRule DetectionRule::parse(std::string_view rule_text) {
    DetectionRule rule;
    rule.rule_text = std::string(rule_text);
    rule.canonical_form = canonicalize_rule(rule_text);
    return rule;
}

bool is_duplicate(const DetectionRule& rule, const std::set<std::string>& seen) {
    return seen.count(rule.canonical_form) > 0;
}

const char* to_string(Severity s) {
    switch (s) {
        case Severity::low: return "low";
        case Severity::medium: return "medium";
        case Severity::high: return "high";
    }
    return "medium";
}

Severity severity_from_string(std::string_view s) {
    if (s == "low") return Severity::low;
    if (s == "medium") return Severity::medium;
    if (s == "high") return Severity::high;
    throw Error(ErrorCategory::domain, "unknown severity: " + std::string(s));
}

void RuleMetadata::validate() const {
    auto check = [](const std::string& value, const char* name) {
        if (value.empty()) {
            throw Error(ErrorCategory::domain, std::string("metadata field is empty: ") + name);
        }
        if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos) {
            throw Error(ErrorCategory::domain,
                        std::string("metadata field must be single-line: ") + name);
        }
    };
    check(classification, "classification");
    check(description, "description");
    check(analyzer_id, "analyzer_id");
}

Bytes RuleBundle::serialize() const {
    metadata.validate();
    if (contributor.empty()) {
        throw Error(ErrorCategory::domain, "bundle has no contributor key");
    }
    std::string out;
    out += "analyzer_id=" + metadata.analyzer_id + "\n";
    out += "classification=" + metadata.classification + "\n";
    out += "contributor=" + to_hex(contributor) + "\n";
    out += "created_at=" + std::to_string(metadata.created_at) + "\n";
    out += "description=" + metadata.description + "\n";
    out += "rule=" + rule.rule_text + "\n";
    out += "severity=" + std::string(to_string(metadata.severity)) + "\n";
    return to_bytes(out);
}

RuleBundle RuleBundle::deserialize(const Bytes& data) {
    static const char* expected_keys[] = {"analyzer_id", "classification", "contributor",
                                          "created_at",  "description",    "rule",
                                          "severity"};
    std::istringstream in(to_string(data));
    std::string line;
    std::vector<std::string> values;
    std::size_t idx = 0;
    while (std::getline(in, line)) {
        if (idx >= 7) {
            throw Error(ErrorCategory::domain, "bundle has trailing content");
        }
        std::string prefix = std::string(expected_keys[idx]) + "=";
        if (line.rfind(prefix, 0) != 0) {
            throw Error(ErrorCategory::domain,
                        "bundle field out of order or missing: " + std::string(expected_keys[idx]));
        }
        values.push_back(line.substr(prefix.size()));
        ++idx;
    }
    if (idx != 7) {
        throw Error(ErrorCategory::domain, "bundle is truncated");
    }

    RuleBundle bundle;
    bundle.metadata.analyzer_id = values[0];
    bundle.metadata.classification = values[1];
    bundle.contributor = from_hex(values[2]);
    bundle.metadata.created_at = std::stoull(values[3]);
    bundle.metadata.description = values[4];
    bundle.rule = DetectionRule::parse(values[5]);
    bundle.metadata.severity = severity_from_string(values[6]);
    bundle.metadata.validate();
    return bundle;
}

const char* to_string(Role r) {
    switch (r) {
        case Role::validator: return "validator";
        case Role::contributor: return "contributor";
        case Role::regular: return "regular";
    }
    return "regular";
}

Role role_from_string(std::string_view s) {
    if (s == "validator") return Role::validator;
    if (s == "contributor") return Role::contributor;
    if (s == "regular") return Role::regular;
    throw Error(ErrorCategory::domain, "unknown role: " + std::string(s));
}

void NodeRegistry::add(const Bytes& public_key, Role role, bool subscribed) {
    entries_[to_hex(public_key)] = Entry{role, subscribed};
}

bool NodeRegistry::is_registered(const Bytes& public_key) const {
    return entries_.count(to_hex(public_key)) > 0;
}

bool NodeRegistry::is_subscribed(const Bytes& public_key) const {
    auto it = entries_.find(to_hex(public_key));
    return it != entries_.end() && it->second.subscribed;
}

Role NodeRegistry::role_of(const Bytes& public_key) const {
    auto it = entries_.find(to_hex(public_key));
    if (it == entries_.end()) {
        throw Error(ErrorCategory::not_found, "unknown node key");
    }
    return it->second.role;
}

ContentAddress RuleStore::put_bundle(const RuleBundle& bundle, const Bytes& caller) {
    if (!registry_->is_registered(caller)) {
        throw Error(ErrorCategory::auth, "store put from unregistered node");
    }
    Bytes data = bundle.serialize();
    ContentAddress address = content_address(data);
    catalog_.emplace(address.hex(), std::move(data));
    return address;
}

RuleBundle RuleStore::get_bundle(const ContentAddress& address, const Bytes& caller) const {
    if (!registry_->is_subscribed(caller)) {
        throw Error(ErrorCategory::auth, "store get from unsubscribed node");
    }
    auto it = catalog_.find(address.hex());
    if (it == catalog_.end()) {
        throw Error(ErrorCategory::not_found, "no bundle at address " + address.hex());
    }
    return RuleBundle::deserialize(it->second);
}

bool RuleStore::contains(const ContentAddress& address) const {
    return catalog_.count(address.hex()) > 0;
}

void RuleStore::audit() const {
    for (const auto& [key, data] : catalog_) {
        if (content_address(data).hex() != key) {
            throw Error(ErrorCategory::invariant,
                        "store audit failed: bundle bytes do not hash to catalogue key " + key);
        }
    }
}

}  // namespace cids
