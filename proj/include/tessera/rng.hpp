#pragma once

#include <cstdint>

namespace tessera {

// Counter-based randomness built on splitmix64. Every consumer derives its
// draws from (seed, counter) pairs, so results are bit-identical regardless
// of evaluation order or thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(seed ^ splitmix64(counter + 0x9e3779b97f4a7c15ULL));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
    return uniform01(hash_combine(seed, counter));
}

// Uniform index in [0, n). Modulo bias is negligible for n << 2^64 and the
// mapping is part of the documented deterministic contract.
inline std::size_t uniform_index(std::uint64_t seed, std::uint64_t counter, std::size_t n) {
    return static_cast<std::size_t>(hash_combine(seed, counter) % n);
}

// Small stateful generator for sequential consumers (token sampling). Not
// shared across threads.
class SequentialRng {
public:
    explicit SequentialRng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    std::uint64_t next_bits() {
        state_ = splitmix64(state_);
        return state_;
    }
    double next_uniform01() { return uniform01(next_bits()); }

private:
    std::uint64_t state_;
};

}  // namespace tessera
