#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace vsense {

/// FNV-1a, 64-bit. Used for architecture fingerprints, parameter hashes
/// (frozen-model contracts) and config hashes. Not cryptographic.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xCBF29CE484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

template <typename T>
inline uint64_t fnv1a64_values(const std::vector<T>& v, uint64_t h = 0xCBF29CE484222325ull) {
    return fnv1a64(v.data(), v.size() * sizeof(T), h);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace vsense
