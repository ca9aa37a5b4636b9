#pragma once

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace dsmr::detail {

/// Horner evaluation of a real-coefficient polynomial (ascending powers).
template <typename Scalar>
Scalar horner(std::span<const double> coeffs, Scalar z) {
    Scalar acc = Scalar(0);
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + Scalar(*it);
    return acc;
}

inline int poly_degree(std::span<const double> coeffs) {
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
        if (coeffs[static_cast<std::size_t>(k)] != 0.0) return k;
    return -1;  // zero polynomial
}

inline std::vector<double> poly_derivative(std::span<const double> coeffs) {
    std::vector<double> d;
    for (std::size_t k = 1; k < coeffs.size(); ++k) d.push_back(static_cast<double>(k) * coeffs[k]);
    if (d.empty()) d.push_back(0.0);
    return d;
}

/// Horner value together with a running bound on its evaluation roundoff.
/// Near a multiple root the true residual sits far below this floor, and a
/// Newton step based on it would be noise.
inline std::pair<std::complex<double>, double> horner_bounded(std::span<const double> coeffs,
                                                              std::complex<double> z) {
    constexpr double eps = 2.220446049250313e-16;
    const double az = std::abs(z);
    std::complex<double> acc = 0.0;
    double err = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        acc = acc * z + std::complex<double>(*it);
        err = err * az + std::abs(acc) * eps;
    }
    return {acc, 4.0 * err};
}

/// Roots via the companion matrix, polished with a few complex Newton steps.
/// Throws on non-convergence (residual check against the evaluation floor).
inline std::vector<std::complex<double>> poly_roots(std::span<const double> coeffs) {
    const int deg = poly_degree(coeffs);
    if (deg < 1) return {};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    const double lead = coeffs[static_cast<std::size_t>(deg)];
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coeffs[static_cast<std::size_t>(i)] / lead;
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw std::runtime_error("poly_roots: eigensolver failed");

    const auto dcoeffs = poly_derivative(coeffs);
    double scale = 0.0;
    for (double c : coeffs) scale = std::max(scale, std::abs(c));

    std::vector<std::complex<double>> roots;
    roots.reserve(static_cast<std::size_t>(deg));
    for (int i = 0; i < deg; ++i) {
        std::complex<double> r = es.eigenvalues()(i);
        for (int it = 0; it < 8; ++it) {
            const auto [p, floor] = horner_bounded(coeffs, r);
            if (std::abs(p) <= floor) break;  // at the evaluation noise level already
            const std::complex<double> dp = horner(std::span<const double>(dcoeffs), r);
            if (std::abs(dp) < 1e-300) break;
            const std::complex<double> step = p / dp;
            r -= step;
            if (std::abs(step) < 1e-15 * (1.0 + std::abs(r))) break;
        }
        const auto [p, floor] = horner_bounded(coeffs, r);
        const double tol = std::max(floor, 1e-9 * scale * std::pow(1.0 + std::abs(r), deg));
        if (!(std::abs(p) <= tol))
            throw std::runtime_error("poly_roots: root refinement residual " + std::to_string(std::abs(p)));
        roots.push_back(r);
    }
    return roots;
}

/// Taylor coefficients of P/Q about 0 by long division, in long double.
/// Q[0] must be nonzero.
inline std::vector<long double> series_divide(std::span<const double> p, std::span<const double> q,
                                              int terms) {
    if (q.empty() || q[0] == 0.0) throw std::invalid_argument("series_divide: Q(0) == 0");
    std::vector<long double> c(static_cast<std::size_t>(terms), 0.0L);
    for (int k = 0; k < terms; ++k) {
        long double s = k < static_cast<int>(p.size()) ? static_cast<long double>(p[static_cast<std::size_t>(k)]) : 0.0L;
        for (int i = 1; i <= k; ++i)
            if (i < static_cast<int>(q.size()))
                s -= static_cast<long double>(q[static_cast<std::size_t>(i)]) * c[static_cast<std::size_t>(k - i)];
        c[static_cast<std::size_t>(k)] = s / static_cast<long double>(q[0]);
    }
    return c;
}

}  // namespace dsmr::detail
