#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ledgerlab {

inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xCBF29CE484222325ULL) noexcept
{
    std::uint64_t h = basis;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) noexcept
{
    return mix64(a ^ mix64(b));
}

/// Maps a 64-bit draw onto [0, 1) using the top 53 bits.
inline constexpr double unit_interval(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seeded generator with platform-stable derived distributions. The standard
/// <random> distributions are implementation-defined, so only the raw
/// mt19937_64 stream is used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform01() { return unit_interval(engine_()); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t draw = engine_();
        while (draw >= limit)
            draw = engine_();
        return draw % bound;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace ledgerlab
