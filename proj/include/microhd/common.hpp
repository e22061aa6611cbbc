#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace microhd {

/// Integer price in ticks.
using Ticks = std::int64_t;

enum class ErrorCode {
    invalid_argument,
    no_quote,
    undefined_imbalance,
    zero_volume,
    invariant_violation,
    rejected_event,
    parse_error,
    insufficient_data,
    estimation_failure,
    diverged,
    dimension_mismatch,
    untrained_model,
    io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure signalled by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Randomness
//
// std::mt19937_64 is bit-specified by the standard; the distributions are not,
// so bounded draws go through the helpers below to stay reproducible across
// standard libraries.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    return r % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Exponential variate with the given rate.
double exponential(Rng& rng, double rate);

// ---------------------------------------------------------------------------
// Exact text encoding of doubles (hexfloat), used by every versioned file.
// ---------------------------------------------------------------------------

std::string hexfloat(double value);
double parse_hexfloat(std::string_view text);

}  // namespace microhd
