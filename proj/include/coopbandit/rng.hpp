#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

// Reproducible random streams.
//
// Every stream is a std::mt19937_64 engine (whose output sequence is fixed by
// the C++ standard) seeded with a 64-bit key. Keys are derived from the
// experiment seed, a purpose label and an index with the SplitMix64 finalizer,
// so substreams for different purposes never share state. Conversions to
// doubles and integers are done here, not through <random> distributions.

namespace coopbandit {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over the label bytes.
constexpr std::uint64_t label_hash(std::string_view label) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Key of the substream (purpose, index) under a master seed.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) noexcept
{
    return mix64(mix64(mix64(seed) ^ label_hash(purpose)) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Top 53 bits of x mapped to [0, 1).
constexpr double unit_double(std::uint64_t x) noexcept
{
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Counter-based uniform in [0, 1) addressed by (key, a, b). Used for per
/// (agent, round) draws so results do not depend on iteration order.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b) noexcept
{
    return unit_double(mix64(mix64(key ^ mix64(a)) + 0x9e3779b97f4a7c15ULL * (b + 1)));
}

class Rng {
public:
    explicit Rng(std::uint64_t key) : engine_(key) {}

    std::uint64_t next() { return engine_(); }

    double uniform() { return unit_double(engine_()); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n) by rejection.
    std::size_t below(std::size_t n)
    {
        if (n == 0) {
            throw std::invalid_argument("Rng::below: empty range");
        }
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return static_cast<std::size_t>(x % bound);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace coopbandit
