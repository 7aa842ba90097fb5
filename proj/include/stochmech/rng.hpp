#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stochmech {

namespace detail {

/// Stafford variant 13 of the splitmix64 finalizer. Bijective on u64.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Stateless counter hash: statistically independent outputs for distinct
/// (key, ctr_hi, ctr_lo) triples, identical outputs for identical triples.
inline constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t hi, std::uint64_t lo) {
    std::uint64_t h = mix64(key + kGolden * (hi + 1));
    h = mix64(h ^ (lo + kGolden));
    return mix64(h + kGolden * lo);
}

/// Uniform double in (0, 1]; never 0 so log() below is safe.
inline double u64_to_unit_open(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

/// Uniform double in [0, 1).
inline double u64_to_unit(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Derives the per-path key from the ensemble master seed. Pure function of
/// (master_seed, path_index): paths may be generated in any order, on any
/// worker, with identical results.
inline constexpr std::uint64_t derive_path_key(std::uint64_t master_seed, std::uint64_t path_index) {
    return detail::mix64(detail::mix64(master_seed ^ detail::kGolden) + detail::kGolden * (path_index + 1));
}

/// Standard normal deviate addressed by (key, counter, channel).
/// Box-Muller on two counter-hash uniforms; bit-reproducible for a fixed
/// binary since every input addresses a unique hash pair.
inline double normal_at(std::uint64_t key, std::uint64_t counter, std::uint32_t channel) {
    const std::uint64_t lo = (static_cast<std::uint64_t>(channel) << 1);
    const double u1 = detail::u64_to_unit_open(detail::counter_hash(key, counter, lo));
    const double u2 = detail::u64_to_unit(detail::counter_hash(key, counter, lo + 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

/// Gaussian Wiener increments for one sample path: 2n channels (one x-channel
/// and one p-channel per degree of freedom), each increment N(0, dt).
///
/// Increments are addressed, not streamed: (seed, channel, step index) fully
/// determines the value, so a path can be re-integrated or resumed and the
/// same increments come back bit-identically.
class WienerIncrementStream {
public:
    WienerIncrementStream(std::uint64_t path_key, std::size_t dof, double dt)
        : key_(path_key), channels_(2 * dof), dt_(dt), sqrt_dt_(std::sqrt(dt)) {}

    std::size_t channels() const { return channels_; }
    double dt() const { return dt_; }

    /// Increment for the x-channel of mode `mode` at step `step`.
    double dw_x(std::uint64_t step, std::size_t mode) const {
        return sqrt_dt_ * normal_at(key_, step, static_cast<std::uint32_t>(2 * mode));
    }

    /// Increment for the p-channel of mode `mode` at step `step`.
    double dw_p(std::uint64_t step, std::size_t mode) const {
        return sqrt_dt_ * normal_at(key_, step, static_cast<std::uint32_t>(2 * mode + 1));
    }

    /// Standard normal draws reserved for initial-condition sampling, kept in
    /// a counter range disjoint from the in-flight noise.
    double initial_normal(std::size_t index) const {
        return normal_at(key_, kInitCounterBase + index, 0);
    }

private:
    static constexpr std::uint64_t kInitCounterBase = 0x8000000000000000ULL;
    std::uint64_t key_;
    std::size_t channels_;
    double dt_;
    double sqrt_dt_;
};

} // namespace stochmech
