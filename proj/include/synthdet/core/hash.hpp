#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace synthdet {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

// splitmix64 finalizer; decorrelates sequential seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

namespace detail {
template <std::integral T>
uint64_t hash_one(uint64_t h, T v) {
    return mix64(h ^ mix64(static_cast<uint64_t>(v)));
}
inline uint64_t hash_one(uint64_t h, std::string_view s) { return mix64(h ^ fnv1a64(s)); }
inline uint64_t hash_one(uint64_t h, const char* s) { return hash_one(h, std::string_view(s)); }
inline uint64_t hash_one(uint64_t h, const std::string& s) { return hash_one(h, std::string_view(s)); }
}  // namespace detail

template <typename... Args>
uint64_t hash_combine(uint64_t h, Args&&... args) {
    ((h = detail::hash_one(h, args)), ...);
    return h;
}

}  // namespace synthdet
