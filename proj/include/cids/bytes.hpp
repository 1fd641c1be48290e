#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace cids {

using Bytes = std::vector<unsigned char>;

std::string to_hex(const unsigned char* data, std::size_t len);
std::string to_hex(const Bytes& data);
Bytes from_hex(std::string_view hex);  // throws Error(domain) on odd length / bad digit

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

// Canonical message encoding: every field is framed as an 8-byte
// little-endian length followed by the field bytes, appended in declared
// field order. Numeric fields are fixed 8-byte little-endian values, so
// the encoding of a record is unique and unambiguous for variable-length
// fields.
class PayloadWriter {
public:
    PayloadWriter& field(std::string_view s) {
        append_framed(reinterpret_cast<const unsigned char*>(s.data()), s.size());
        return *this;
    }

    PayloadWriter& field(const Bytes& b) {
        append_framed(b.data(), b.size());
        return *this;
    }

    PayloadWriter& field(std::uint64_t v) {
        unsigned char raw[8];
        put_le64(raw, v);
        append_framed(raw, 8);
        return *this;
    }

    PayloadWriter& field(std::int64_t v) {
        return field(static_cast<std::uint64_t>(v));  // two's complement
    }

    PayloadWriter& field(double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        return field(bits);
    }

    const Bytes& bytes() const { return buf_; }

private:
    static void put_le64(unsigned char* out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
    }

    void append_framed(const unsigned char* data, std::size_t len) {
        unsigned char raw[8];
        put_le64(raw, static_cast<std::uint64_t>(len));
        buf_.insert(buf_.end(), raw, raw + 8);
        buf_.insert(buf_.end(), data, data + len);
    }

    Bytes buf_;
};

// splitmix64, used to derive per-agent seeds from the scenario seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace cids
