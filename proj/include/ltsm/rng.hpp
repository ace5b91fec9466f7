#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace ltsm {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a tuple of 64-bit words.
template <class... Ts>
constexpr std::uint64_t hash_words(std::uint64_t first, Ts... rest) {
    std::uint64_t h = splitmix64(first);
    ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(rest) + 0x632BE59BD9B4E019ULL))), ...);
    return h;
}

/// Uniform on the open interval (0,1) from 64 random bits.
inline double open_uniform(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// A reproducible random stream. The pair (seed, stream_index) fully determines the
/// generated sequence, so streams can be handed to any thread in any order.
///
/// The engine is xoshiro256** seeded through SplitMix64. It satisfies
/// UniformRandomBitGenerator so Boost/std distributions can consume it directly.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_index) : seed_(seed), index_(stream_index) {
        std::uint64_t x = hash_words(seed, stream_index);
        for (auto& w : s_) {
            x = splitmix64(x);
            w = x;
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_index() const { return index_; }

    /// Child stream keyed by `key`; independent of this stream's consumption state.
    RngStream derive(std::uint64_t key) const { return RngStream(hash_words(seed_, index_, 0xD1B54A32D192ED03ULL), key); }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() { return open_uniform((*this)()); }
    double normal() { return normal_(*this); }
    double exponential() { return exponential_(*this); }
    /// +1 or -1 with equal probability.
    double sign() { return ((*this)() >> 63) ? 1.0 : -1.0; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t index_;
    std::array<std::uint64_t, 4> s_{};
    boost::random::normal_distribution<double> normal_{};
    boost::random::exponential_distribution<double> exponential_{};
};

}  // namespace ltsm
