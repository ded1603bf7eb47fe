#include <fimcb/rng.hpp>

#include <cmath>
#include <stdexcept>

namespace fimcb {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("Rng::uniform_int: n must be >= 1");
    }
    // Lemire's multiply-shift rejection method.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        std::uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) {
        throw std::invalid_argument("Rng::uniform_int: empty range");
    }
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform_int(span));
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over the combined value.
    std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t state) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state ^= bytes[i];
        state *= 0x100000001b3ull;
    }
    return state;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t state) {
    return fnv1a64_bytes(text.data(), text.size(), state);
}

} // namespace fimcb
