#pragma once

#include <cstdint>
#include <vector>

namespace ratemb {

/// Small explicit-state generator, reproducible bit-for-bit on every platform.
///
/// The seed is expanded once with splitmix64:
///     z = seed + 0x9E3779B97F4A7C15
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     state = z ^ (z >> 31)            (replaced by 0x9E3779B97F4A7C15 if 0)
/// and each draw applies xorshift64*:
///     state ^= state >> 12; state ^= state << 25; state ^= state >> 27
///     return state * 0x2545F4914F6CDD1D
/// uniform() takes the top 53 bits of a draw and scales by 2^-53.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform on [0, 1).
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    /// Derives an independent child seed from this generator's seed and a tag.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ratemb
