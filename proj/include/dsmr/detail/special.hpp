#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace dsmr::detail {

/// Tail of the Hurwitz zeta function: sum_{j >= 0} (x + j)^{-s} for s > 1,
/// x >= 1, by Euler-Maclaurin with three correction terms. The result struct
/// carries a rigorous remainder bound (first omitted EM term dominates).
struct TailValue {
    double value = 0.0;
    double error_bound = 0.0;
};

inline TailValue hurwitz_tail(double s, double x) {
    if (!(s > 1.0) || !(x > 0.0)) throw std::invalid_argument("hurwitz_tail: need s > 1, x > 0");
    // Sum a few terms directly until the EM point is comfortably large.
    double head = 0.0;
    while (x < 16.0) {
        head += std::pow(x, -s);
        x += 1.0;
    }
    const double xs = std::pow(x, -s);
    const double t0 = xs * x / (s - 1.0);          // integral term x^{1-s}/(s-1)
    const double t1 = 0.5 * xs;                    // boundary
    const double t2 = s * xs / x / 12.0;           // B_2/2! f'(x)
    const double t3 = s * (s + 1.0) * (s + 2.0) * xs / (x * x * x) / 720.0;  // B_4/4! f'''(x)
    return {head + t0 + t1 + t2 - t3, t3};
}

/// sum_{n >= 1} sqrt(n) x^n for x in [0, 1). Direct summation for moderate x,
/// and the Lerch/Mellin asymptotic expansion in mu = -log x near x = 1:
///   Li_{-1/2}(e^{-mu}) = Gamma(3/2) mu^{-3/2} + sum_k zeta(-1/2-k) (-mu)^k / k!
inline TailValue sqrt_polylog(double x) {
    if (!(x >= 0.0) || !(x < 1.0)) throw std::invalid_argument("sqrt_polylog: need 0 <= x < 1");
    if (x == 0.0) return {0.0, 0.0};
    const double mu = -std::log(x);
    if (mu > 0.35) {
        double s = 0.0, xn = 1.0;
        long n = 1;
        for (;;) {
            xn *= x;
            const double term = std::sqrt(static_cast<double>(n)) * xn;
            s += term;
            // remaining terms are below sqrt(n+1)/sqrt(n) * term * x / (1-x) * ...
            const double tail = term * x / (1.0 - x) * 2.0;
            if (tail < 1e-16 * (s + 1.0) || n > 4000) return {s, tail};
            ++n;
        }
    }
    static constexpr std::array<double, 12> zeta_half = {
        -0.20788622497735457, -0.025485201889833036, 0.0085169287778503305,
        0.0044410113354794320, -0.0030916692472158338, -0.0026714580198992246,
        0.0027467679395368688, 0.0032690395726002200, -0.0044160328730048898,
        -0.0066721722964666408, 0.011146122473942814, 0.020396978715942792};
    constexpr double gamma_three_halves = 0.8862269254527580;
    double s = gamma_three_halves * std::pow(mu, -1.5);
    double mupow = 1.0;
    double last = 0.0;
    for (std::size_t k = 0; k < zeta_half.size(); ++k) {
        last = zeta_half[k] * mupow;
        s += last;
        mupow *= -mu / static_cast<double>(k + 1);
    }
    return {s, std::abs(zeta_half.back() * mupow) + std::abs(last) * 1e-14};
}

/// psi(j, s) = int_0^{1-s} (1-s-r) (j+r)^{-1-sigma} dr, the averaging weight
/// appearing in the fractional-difference kernels. Closed-form antiderivative
/// for small j; cancellation-free asymptotic series for large j.
inline double psi_weight(double j, double s, double sigma) {
    const double u = 1.0 - s;
    if (!(u > 0.0) || !(u <= 1.0)) throw std::invalid_argument("psi_weight: s in [0,1)");
    if (j <= 64.0) {
        auto F = [&](double w) {  // antiderivative of ((u+j) - w) w^{-1-sigma} at w = j + r
            return -(u + j) * std::pow(w, -sigma) / sigma - std::pow(w, 1.0 - sigma) / (1.0 - sigma);
        };
        return F(j + u) - F(j);
    }
    // (j+r)^{-1-sigma} = j^{-1-sigma} sum_i binom(-1-sigma, i) (r/j)^i with
    // moment integrals int_0^u (u - r) r^i dr = u^{i+2}/((i+1)(i+2)).
    double acc = 0.0, coef = 1.0;
    for (int i = 0; i < 6; ++i) {
        const double moment = std::pow(u, i + 2) / ((i + 1.0) * (i + 2.0));
        acc += coef * moment / std::pow(j, i);
        coef *= -(1.0 + sigma + i) / (i + 1.0);
    }
    return acc * std::pow(j, -1.0 - sigma);
}

}  // namespace dsmr::detail
