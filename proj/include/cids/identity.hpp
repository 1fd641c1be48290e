#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "cids/bytes.hpp"

namespace cids {

// Ed25519 key pair. Key derivation from a 32-byte seed is deterministic,
// which is what makes scenario runs reproducible.
struct NodeKeyPair {
    Bytes public_key;  // 32 bytes
    Bytes secret_key;  // 64 bytes
};

using Seed32 = std::array<unsigned char, 32>;

Seed32 seed_from_u64(std::uint64_t value);

NodeKeyPair generate_keypair(const Seed32& seed);

// Signs sha256(payload), not the raw payload. Callers pass the canonical
// encoding of the record being signed (see PayloadWriter).
Bytes sign_message(const NodeKeyPair& key, const Bytes& payload);

bool verify_signature(const Bytes& public_key, const Bytes& payload, const Bytes& signature);

Bytes sha256(const Bytes& data);

// 32-byte content hash of a serialized rule bundle; the retrieval key in
// the rule store.
struct ContentAddress {
    std::array<unsigned char, 32> digest{};

    std::string hex() const { return to_hex(digest.data(), digest.size()); }
    static ContentAddress from_hex(std::string_view hex);

    auto operator<=>(const ContentAddress&) const = default;
};

ContentAddress content_address(const Bytes& bundle_bytes);

}  // namespace cids
