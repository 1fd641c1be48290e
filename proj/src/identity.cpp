#include "cids/identity.hpp"

#include <sodium.h>

#include <mutex>

#include "cids/errors.hpp"

namespace cids {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) {
            throw Error(ErrorCategory::invariant, "libsodium initialization failed");
        }
    });
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string to_hex(const unsigned char* data, std::size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

std::string to_hex(const Bytes& data) { return to_hex(data.data(), data.size()); }

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw Error(ErrorCategory::domain, "hex string has odd length");
    }
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_digit(hex[i]);
        int lo = hex_digit(hex[i + 1]);
        if (hi < 0 || lo < 0) {
            throw Error(ErrorCategory::domain, "invalid hex digit");
        }
        out.push_back(static_cast<unsigned char>((hi << 4) | lo));
    }
    return out;
}

Seed32 seed_from_u64(std::uint64_t value) {
    Seed32 seed{};
    std::uint64_t state = value;
    for (int word = 0; word < 4; ++word) {
        std::uint64_t v = splitmix64(state);
        for (int i = 0; i < 8; ++i) {
            seed[static_cast<std::size_t>(word * 8 + i)] =
                static_cast<unsigned char>(v >> (8 * i));
        }
    }
    return seed;
}

NodeKeyPair generate_keypair(const Seed32& seed) {
    ensure_sodium();
    NodeKeyPair kp;
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
    return kp;
}

Bytes sign_message(const NodeKeyPair& key, const Bytes& payload) {
    ensure_sodium();
    Bytes digest = sha256(payload);
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, digest.data(), digest.size(),
                         key.secret_key.data());
    return sig;
}

bool verify_signature(const Bytes& public_key, const Bytes& payload, const Bytes& signature) {
    ensure_sodium();
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES || signature.size() != crypto_sign_BYTES) {
        return false;
    }
    Bytes digest = sha256(payload);
    return crypto_sign_verify_detached(signature.data(), digest.data(), digest.size(),
                                       public_key.data()) == 0;
}

Bytes sha256(const Bytes& data) {
    ensure_sodium();
    Bytes digest(crypto_hash_sha256_BYTES);
    crypto_hash_sha256(digest.data(), data.data(), data.size());
    return digest;
}

ContentAddress ContentAddress::from_hex(std::string_view hex) {
    Bytes raw = cids::from_hex(hex);
    if (raw.size() != 32) {
        throw Error(ErrorCategory::domain, "content address must be 32 bytes");
    }
    ContentAddress addr;
    std::copy(raw.begin(), raw.end(), addr.digest.begin());
    return addr;
}

ContentAddress content_address(const Bytes& bundle_bytes) {
    Bytes digest = sha256(bundle_bytes);
    ContentAddress addr;
    std::copy(digest.begin(), digest.end(), addr.digest.begin());
    return addr;
}

}  // namespace cids
