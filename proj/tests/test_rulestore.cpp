#include <doctest.h>

#include <set>

#include "cids/errors.hpp"
#include "cids/identity.hpp"
#include "cids/rulestore.hpp"
#include "cids/scenario.hpp"
#include "test_support.hpp"

using namespace cids;
using namespace cids::testing;

namespace {

RuleBundle make_bundle(const std::string& rule_text, const Bytes& contributor,
                       std::uint64_t created_at = 1) {
    RuleBundle bundle;
    bundle.rule = DetectionRule::parse(rule_text);
    bundle.metadata.classification = "signature-match";
    bundle.metadata.severity = Severity::medium;
    bundle.metadata.description = "test rule";
    bundle.metadata.created_at = created_at;
    bundle.metadata.analyzer_id = "tester";
    bundle.contributor = contributor;
    return bundle;
}

}  // namespace

TEST_CASE("canonicalization normalizes whitespace and option order") {
    std::string a = "alert tcp any any -> any 80 (msg:\"x\"; sid:1; rev:2;)";
    std::string b = "alert   tcp any any ->  any 80 ( sid:1 ;msg:\"x\";rev:2 )";
    std::string c = "alert tcp any any -> any 80 (rev:2; msg:\"x\"; sid:1;)";
    CHECK(canonicalize_rule(a) == canonicalize_rule(b));
    CHECK(canonicalize_rule(a) == canonicalize_rule(c));

    std::string different = "alert tcp any any -> any 80 (msg:\"x\"; sid:2; rev:2;)";
    CHECK(canonicalize_rule(a) != canonicalize_rule(different));
}

TEST_CASE("canonicalization is idempotent") {
    Corpus corpus = Corpus::load(corpus_dir());
    int checked = 0;
    for (const std::string& text : corpus.valid) {
        std::string once = canonicalize_rule(text);
        REQUIRE(canonicalize_rule(once) == once);
        if (++checked == 50) break;
    }
}

TEST_CASE("canonicalization respects quoted separators") {
    std::string quoted = "alert tcp any any -> any 23 (msg:\"a;b ( c\"; content:\"x y\"; sid:9;)";
    std::string spaced = "alert tcp any any -> any 23 (content:\"x y\";   msg:\"a;b ( c\";sid:9;)";
    CHECK(canonicalize_rule(quoted) == canonicalize_rule(spaced));
    CHECK(canonicalize_rule(quoted).find("a;b ( c") != std::string::npos);
}

TEST_CASE("canonicalization rejects malformed rules") {
    CHECK_THROWS_AS(canonicalize_rule(""), Error);
    CHECK_THROWS_AS(canonicalize_rule("   "), Error);
    CHECK_THROWS_AS(canonicalize_rule("alert tcp\nany"), Error);
    CHECK_THROWS_AS(canonicalize_rule("alert tcp any (msg:\"x\";"), Error);
    CHECK_THROWS_AS(canonicalize_rule("alert tcp any (msg:\"unclosed)"), Error);
}

TEST_CASE("duplicate detection over a labeled corpus") {
    // (rule text, group id): same group means duplicate under
    // normalization, different group means distinct.
    const std::vector<std::pair<std::string, int>> corpus = {
        {"alert tcp any any -> any 80 (msg:\"sql probe\"; content:\"union\"; sid:1;)", 0},
        {"alert  tcp any any ->  any 80 (msg:\"sql probe\";content:\"union\";sid:1;)", 0},
        {"alert tcp any any -> any 80 (content:\"union\"; sid:1; msg:\"sql probe\";)", 0},
        {"alert tcp any any -> any 80 (sid:1; content:\"union\"; msg:\"sql probe\")", 0},
        {"alert tcp any any -> any 80 (msg:\"sql probe\"; content:\"union\"; sid:2;)", 1},
        {"alert udp any any -> any 53 (msg:\"dns tunnel\"; sid:3;)", 2},
        {"alert udp any any -> any 53 ( msg:\"dns tunnel\" ; sid:3 ; )", 2},
        {"alert udp any any -> any 53 (msg:\"dns tunnel\"; sid:4;)", 3},
        {"alert tcp any any -> any 23 (msg:\"telnet sweep\"; sid:5; rev:1;)", 4},
        {"alert tcp any any -> any 23 (rev:1; sid:5; msg:\"telnet sweep\";)", 4},
        {"alert tcp any any -> any 23 (msg:\"telnet sweep\"; sid:5; rev:2;)", 5},
        {"alert icmp any any -> any any (msg:\"ping flood\"; sid:6;)", 6},
        {"alert icmp  any any ->   any any (sid:6;msg:\"ping flood\";)", 6},
        {"alert tcp any any -> any 443 (msg:\"tls probe\"; content:\"|16 03|\"; sid:7;)", 7},
        {"alert tcp any any -> any 443 (content:\"|16 03|\"; msg:\"tls probe\"; sid:7)", 7},
        {"alert tcp any any -> any 443 (msg:\"tls probe\"; content:\"|16 04|\"; sid:7;)", 8},
        {"alert tcp $HOME_NET any -> any 25 (msg:\"vrfy scan\"; sid:8;)", 9},
        {"alert tcp $HOME_NET  any  ->  any 25 (msg:\"vrfy scan\";sid:8;)", 9},
        {"alert tcp $EXTERNAL_NET any -> any 25 (msg:\"vrfy scan\"; sid:8;)", 10},
        {"alert tcp any any -> any 8080 (msg:\"proxy abuse\"; sid:9;)", 11},
    };

    std::set<std::string> seen;
    std::set<int> seen_groups;
    for (const auto& [text, group] : corpus) {
        DetectionRule rule = DetectionRule::parse(text);
        bool expected = seen_groups.count(group) > 0;
        CHECK_MESSAGE(is_duplicate(rule, seen) == expected, "rule: ", text);
        seen.insert(rule.canonical_form);
        seen_groups.insert(group);
    }
}

TEST_CASE("metadata validation") {
    RuleMetadata meta;
    meta.classification = "signature-match";
    meta.description = "d";
    meta.analyzer_id = "a";
    CHECK_NOTHROW(meta.validate());

    RuleMetadata empty = meta;
    empty.description = "";
    CHECK_THROWS_AS(empty.validate(), Error);

    RuleMetadata multiline = meta;
    multiline.description = "a\nb";
    CHECK_THROWS_AS(multiline.validate(), Error);

    CHECK(severity_from_string("high") == Severity::high);
    CHECK_THROWS_AS(severity_from_string("urgent"), Error);
}

TEST_CASE("bundle serialization is canonical and round-trips") {
    Bytes key = generate_keypair(seed_from_u64(1)).public_key;
    RuleBundle a = make_bundle("alert tcp any any -> any 80 (msg:\"x\"; sid:1;)", key, 7);
    RuleBundle b = make_bundle("alert tcp any any -> any 80 (msg:\"x\"; sid:1;)", key, 7);
    CHECK(a.serialize() == b.serialize());

    RuleBundle later = make_bundle("alert tcp any any -> any 80 (msg:\"x\"; sid:1;)", key, 8);
    CHECK(a.serialize() != later.serialize());

    RuleBundle parsed = RuleBundle::deserialize(a.serialize());
    CHECK(parsed.serialize() == a.serialize());
    CHECK(parsed.rule.canonical_form == a.rule.canonical_form);
    CHECK(parsed.metadata.created_at == 7);

    CHECK_THROWS_AS(RuleBundle::deserialize(to_bytes("rule=half a bundle\n")), Error);
}

TEST_CASE("store access control and round trip") {
    NodeRegistry registry;
    Bytes alice = generate_keypair(seed_from_u64(1)).public_key;
    Bytes bob = generate_keypair(seed_from_u64(2)).public_key;
    Bytes mallory = generate_keypair(seed_from_u64(3)).public_key;
    Bytes lurker = generate_keypair(seed_from_u64(4)).public_key;
    registry.add(alice, Role::contributor);
    registry.add(bob, Role::regular);
    registry.add(lurker, Role::regular, /*subscribed=*/false);

    RuleStore store(registry);
    RuleBundle bundle = make_bundle("alert tcp any any -> any 80 (msg:\"x\"; sid:1;)", alice);

    ContentAddress address = store.put_bundle(bundle, alice);
    CHECK(store.size() == 1);

    // Idempotent re-put.
    CHECK(store.put_bundle(bundle, alice) == address);
    CHECK(store.size() == 1);

    RuleBundle fetched = store.get_bundle(address, bob);
    CHECK(fetched.serialize() == bundle.serialize());
    CHECK(content_address(fetched.serialize()) == address);

    CHECK_THROWS_AS(store.put_bundle(bundle, mallory), Error);
    CHECK_THROWS_AS(store.get_bundle(address, lurker), Error);

    ContentAddress missing = content_address(to_bytes("nothing here"));
    CHECK_THROWS_AS(store.get_bundle(missing, bob), Error);

    CHECK_NOTHROW(store.audit());
}
