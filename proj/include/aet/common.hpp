#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aet {

inline constexpr const char* kVersion = "0.1.0";

// Invalid configuration (field values, file contents that cannot describe a run).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller handed in something the operation rejects (dead-agent command,
// incompatible snapshot, same-side matchup, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or layout mismatch between tensors / observation blocks.
struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation called in the wrong order (backward before forward, step on a
// terminal state, ...).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File-format problems: bad magic, truncated stream, tampered header.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, used for config hashes and replay state hashes.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the xor-rotated pair
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

enum class Side : uint8_t { Cat = 0, Mouse = 1 };

inline const char* side_name(Side s) { return s == Side::Cat ? "cat" : "mouse"; }

inline Side other_side(Side s) { return s == Side::Cat ? Side::Mouse : Side::Cat; }

}  // namespace aet
