#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "dsmr/spectral.hpp"

using namespace dsmr;
using Catch::Approx;

TEST_CASE("dirichlet laplacian spectra") {
    REQUIRE(make_dirichlet_laplacian(1, std::numbers::pi).eigenvalues == std::vector<double>{1.0});
    const auto op3 = make_dirichlet_laplacian(3, std::numbers::pi);
    REQUIRE(op3.eigenvalues[0] == Approx(1.0));
    REQUIRE(op3.eigenvalues[1] == Approx(4.0));
    REQUIRE(op3.eigenvalues[2] == Approx(9.0));
    const auto op64 = make_dirichlet_laplacian(64, 1.0);
    REQUIRE(op64.eigenvalues.front() == Approx(std::numbers::pi * std::numbers::pi));
    REQUIRE(op64.eigenvalues.back() == Approx(std::pow(64.0 * std::numbers::pi, 2)));
    REQUIRE_THROWS_AS(make_dirichlet_laplacian(0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_explicit_operator({1.0, 1.0}), std::invalid_argument);  // not increasing
    REQUIRE_THROWS_AS(make_explicit_operator({-1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("spectral calculus specializations") {
    const auto op = make_explicit_operator({1.0, 4.0});
    const ModeVector x{1.0, 1.0};
    REQUIRE(semigroup_apply(op, 0.0, x) == x);  // identity

    const auto op4 = make_explicit_operator({4.0});
    REQUIRE(frac_power_apply(op4, 0.5, ModeVector{1.0})[0] == Approx(2.0));

    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    const auto op1 = make_explicit_operator({1.0});
    REQUIRE(scheme_step_apply(op1, ie, 1.0, ModeVector{1.0})[0] == Approx(0.5));

    REQUIRE_THROWS_AS(apply_spectral(op, [](double) { return std::nan(""); }, x), std::domain_error);
    REQUIRE_THROWS_AS(semigroup_apply(op, 1.0, ModeVector{1.0}), std::invalid_argument);
}

TEST_CASE("space norms") {
    const auto e1 = make_explicit_operator({3.7, 11.0});
    REQUIRE(space_norm(e1, ModeVector{1.0, 0.0}, 0.0) == Approx(1.0));
    const auto op = make_explicit_operator({1.0, 4.0});
    REQUIRE(space_norm(op, ModeVector{1.0, 1.0}, 1.0) == Approx(std::sqrt(17.0)));
    const auto op9 = make_explicit_operator({9.0});
    REQUIRE(space_norm(op9, ModeVector{2.0}, 0.5) == Approx(6.0));
    // q = 4 sequence model
    const auto opq = make_explicit_operator({1.0, 16.0}, 4.0);
    REQUIRE(space_norm(opq, ModeVector{1.0, 1.0}, 0.5) ==
            Approx(std::pow(1.0 + std::pow(4.0, 4.0), 0.25)));
}

TEST_CASE("trace norm: closed-form single mode and edge cases") {
    const auto op = make_explicit_operator({1.0});
    // alpha = 1/2, p = 2: ||x|| + (int_0^inf e^{-2t} dt)^{1/2} = 1 + 1/sqrt(2)
    REQUIRE(trace_norm(op, ModeVector{1.0}, 0.5, 2.0) == Approx(1.0 + 1.0 / std::sqrt(2.0)).epsilon(1e-6));
    REQUIRE(trace_norm(op, ModeVector{0.0}, 0.5, 2.0) == 0.0);
    REQUIRE_THROWS_AS(trace_norm(op, ModeVector{1.0}, 1.5, 2.0), std::invalid_argument);
}

TEST_CASE("trace norm is equivalent to the fractional-power norm (p = 2, alpha = 1/2)") {
    const auto op = make_dirichlet_laplacian(16, std::numbers::pi);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 100; ++trial) {
        ModeVector x(16);
        for (auto& v : x) v = normal(rng);
        const double tn = trace_norm(op, x, 0.5, 2.0);
        const double fn = space_norm(op, x, 0.0) + space_norm(op, x, 0.5);
        const double ratio = tn / fn;
        REQUIRE(ratio >= 1.0 / 3.0);
        REQUIRE(ratio <= 3.0);
    }
}

TEST_CASE("scalar semigroup decay bound") {
    // sup_{t>0,k} t^{1/2} lambda^{1/2} e^{-t lambda} <= 1/sqrt(2e), attained at t = 1/(2 lambda)
    const auto op = make_dirichlet_laplacian(64, 1.0);
    const double bound = 1.0 / std::sqrt(2.0 * std::numbers::e);
    double sup = 0.0;
    for (double lam : op.eigenvalues)
        for (int i = 0; i < 400; ++i) {
            const double t = std::pow(10.0, -8.0 + 10.0 * i / 399.0) / lam;
            sup = std::max(sup, std::sqrt(t * lam) * std::exp(-t * lam));
        }
    REQUIRE(sup <= bound + 1e-12);
    REQUIRE(sup == Approx(bound).epsilon(1e-3));  // the grid should come close to attaining it
}

TEST_CASE("semigroup difference bound |e^{-t lam} - e^{-s lam}| <= lam^a (t-s)^a") {
    for (double alpha : {0.0, 0.5, 1.0})
        for (double lam : {0.5, 3.0, 40.0})
            for (double s : {0.0, 0.01, 0.4})
                for (double dt : {1e-4, 0.05, 1.3}) {
                    const double t = s + dt;
                    const double lhs = std::abs(std::exp(-t * lam) - std::exp(-s * lam));
                    REQUIRE(lhs <= std::pow(lam, alpha) * std::pow(dt, alpha) + 1e-14);
                }
}

TEST_CASE("calculus operations commute") {
    const auto op = make_dirichlet_laplacian(8, 2.0);
    ModeVector x{1.0, -2.0, 0.5, 3.0, -1.0, 0.25, 2.0, -0.125};
    const auto a = frac_power_apply(op, 0.5, semigroup_apply(op, 0.3, x));
    const auto b = semigroup_apply(op, 0.3, frac_power_apply(op, 0.5, x));
    for (std::size_t k = 0; k < x.size(); ++k)
        REQUIRE(a[k] == Approx(b[k]).epsilon(1e-15).margin(1e-300));
}

TEST_CASE("fractional-power norm is log-convex in alpha (q = 2)") {
    const auto op = make_dirichlet_laplacian(12, 1.0);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
        ModeVector x(12);
        for (auto& v : x) v = normal(rng);
        for (double theta : {0.25, 0.5, 0.75}) {
            const double lhs = space_norm(op, x, theta);
            const double rhs =
                std::pow(space_norm(op, x, 0.0), 1.0 - theta) * std::pow(space_norm(op, x, 1.0), theta);
            REQUIRE(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("operator norm of A^a(e^{-n tau A} - R^n) matches the scalar grid") {
    // Cross-module consistency: the diagonal operator norm is the max over the
    // spectrum of the scalar quantity driving the decay estimates.
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    const auto op = make_explicit_operator({0.5, 2.0, 8.0, 32.0});
    const double tau = 0.25, alpha = 0.5;
    for (int n : {1, 2, 8, 32}) {
        double op_norm = 0.0;
        for (double lam : op.eigenvalues) {
            const double scal = std::pow(lam, alpha) *
                                std::abs(std::exp(-n * tau * lam) -
                                         std::pow(eval_real(ie, tau * lam), n));
            op_norm = std::max(op_norm, scal);
        }
        // same quantity computed through the scalar z = tau lambda route
        double scalar_max = 0.0;
        for (double lam : op.eigenvalues) {
            const double z = tau * lam;
            scalar_max = std::max(scalar_max, std::pow(z / tau, alpha) *
                                                  std::abs(std::exp(-static_cast<double>(n) * z) -
                                                           std::pow(eval_real(ie, z), n)));
        }
        REQUIRE(op_norm == Approx(scalar_max).epsilon(1e-13));
    }
}
