#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace repro {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based random stream. The k-th output is a pure function of
/// (seed, stream_id, k), so results never depend on which thread consumed the
/// stream or in what order streams were created.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_(stream_id),
          key_(detail::mix64(detail::mix64(seed ^ 0x5851f42d4c957f2dULL) + detail::mix64(stream_id + detail::kGolden))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return at(counter_++); }

    /// Random access into the stream.
    result_type at(std::uint64_t k) const noexcept {
        return detail::mix64(key_ + (k + 1) * detail::kGolden);
    }

    /// Uniform on the open interval (0,1); never returns 0 or 1.
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by Box-Muller; caches the second variate.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t t = (0 - bound) % bound;
            while (lo < t) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives a child seed, e.g. one per replication.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return detail::mix64(seed * detail::kGolden + detail::mix64(tag ^ 0xd1b54a32d192ed03ULL));
}

// Stream id ranges used by the inference procedures.
namespace streams {
inline constexpr std::uint64_t design = 1;
inline constexpr std::uint64_t realized_noise = 2;
inline constexpr std::uint64_t new_design = 3;
inline constexpr std::uint64_t new_design_full = 4;
inline constexpr std::uint64_t index_sample = 5;
inline constexpr std::uint64_t cv_folds = 6;
inline constexpr std::uint64_t candidate_base = 1'000'000;
inline constexpr std::uint64_t nuclear_base = 2'000'000;
}  // namespace streams

}  // namespace repro
