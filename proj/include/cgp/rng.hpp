#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace cgp {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a list of words into one 64-bit key. Used to derive independent
/// sub-seeds, e.g. derive_key({master, member_index, tag}).
constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> words) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (auto w : words) h = splitmix64(h ^ splitmix64(w));
    return h;
}

/// Counter-based random stream: the i-th draw is a pure function of (key, i),
/// so any entry can be regenerated or produced in parallel without shared state.
///
/// Normal variates use Box-Muller on the pair of uniforms (2c, 2c+1); even
/// indices take the cosine branch and odd indices the sine branch.
class CounterStream {
public:
    explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t key() const noexcept { return key_; }

    constexpr std::uint64_t bits(std::uint64_t i) const noexcept {
        return splitmix64(key_ + (i + 1) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    constexpr double uniform(std::uint64_t i) const noexcept {
        return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
    }

    double normal(std::uint64_t i) const noexcept {
        const std::uint64_t pair = i >> 1;
        const double u1 = 1.0 - uniform(2 * pair); // (0, 1]
        const double u2 = uniform(2 * pair + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return (i & 1) ? r * std::sin(angle) : r * std::cos(angle);
    }

private:
    std::uint64_t key_;
};

/// Sequential cursor over a CounterStream; satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t key) noexcept : stream_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return stream_.bits(counter_++); }

    double uniform() noexcept { return stream_.uniform(counter_++); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        // Consume a whole Box-Muller pair per call so the sequence does not
        // depend on call parity.
        if (counter_ & 1) ++counter_;
        const double z = stream_.normal(counter_);
        counter_ += 2;
        return z;
    }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
    }

private:
    CounterStream stream_;
    std::uint64_t counter_ = 0;
};

} // namespace cgp
