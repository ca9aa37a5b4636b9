#pragma once

// Splittable counter-based random numbers: every (seed, path, step, mode)
// tuple keys an independent stream, so paths can be generated in any order
// on any number of threads with identical output.

#include <cmath>
#include <cstdint>

namespace dsmr {

inline constexpr const char* kRngAlgorithmId = "splitmix64-tuple-icdf-v1";

namespace detail_rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail_rng

class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t mode) {
        using detail_rng::kGolden;
        using detail_rng::mix64;
        std::uint64_t h = mix64(seed + kGolden);
        h = mix64(h ^ (path * kGolden + 1));
        h = mix64(h ^ (step * kGolden + 2));
        h = mix64(h ^ (mode * kGolden + 3));
        state_ = h;
    }

    std::uint64_t next_u64() {
        state_ += detail_rng::kGolden;
        return detail_rng::mix64(state_);
    }

    /// Uniform in (0, 1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via the inverse CDF (Acklam's rational approximation,
    /// max relative error 1.15e-9): one uniform per gaussian and no trig,
    /// which matters because every keyed stream typically draws only once.
    double next_gaussian() { return normal_quantile(next_unit()); }

    static double normal_quantile(double u) {
        constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
        constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
        constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
        constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
        constexpr double plow = 0.02425;
        if (u < plow) {
            const double q = std::sqrt(-2.0 * std::log(u));
            return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                   ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        }
        if (u > 1.0 - plow) {
            const double q = std::sqrt(-2.0 * std::log(1.0 - u));
            return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                   ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        }
        const double q = u - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

  private:
    std::uint64_t state_ = 0;
};

}  // namespace dsmr
