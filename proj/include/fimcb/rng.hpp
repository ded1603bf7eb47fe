#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace fimcb {

/// Deterministic 64-bit-seeded random stream. Every draw is derived from the
/// raw mt19937_64 output rather than standard-library distributions, so the
/// sequence for a given seed is identical across platforms and toolchains.
/// Not safe to share across threads; derive per-task streams with mix_seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be >= 1. Unbiased.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal (Box-Muller, spare value cached).
    double normal();

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable mixing of a base seed with a salt, for deriving independent
/// per-task streams (per particle, per grid run, per split group).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// FNV-1a 64-bit hash; used for content checksums and seed salts. The raw
/// byte form carries a distinct name so a (pointer, hash) call cannot bind
/// to it with the hash misread as a length.
std::uint64_t fnv1a64_bytes(const void* data, std::size_t size,
                            std::uint64_t state = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view text,
                      std::uint64_t state = 0xcbf29ce484222325ull);

} // namespace fimcb
