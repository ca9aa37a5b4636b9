#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dsmr/evolve.hpp"
#include "dsmr/noise.hpp"

using namespace dsmr;
using Catch::Approx;

TEST_CASE("bundle covariance formulas") {
    // lambda tau -> 0 limit: E degenerates to dW
    REQUIRE(bundle_cov_dw_e(1e-9, 1.0) == Approx(1.0).epsilon(1e-8));
    REQUIRE(bundle_var_e(1e-9, 1.0) == Approx(1.0).epsilon(1e-8));
    // lambda = 1, tau = 1 closed forms
    REQUIRE(bundle_var_e(1.0, 1.0) == Approx((1.0 - std::exp(-2.0)) / 2.0));
    REQUIRE(bundle_cov_dw_e(1.0, 1.0) == Approx(1.0 - std::exp(-1.0)));
    // series switch region stays smooth
    for (double x : {0.9e-3, 1.1e-3}) {
        REQUIRE(bundle_var_e(x, 1.0) == Approx(1.0 - x + 2.0 * x * x / 3.0).epsilon(1e-9));
    }
}

TEST_CASE("bundle sampling: statistics match the Ito-isometry law") {
    const std::vector<double> lams{1.0};
    const auto coupling = identity_coupling(1);
    const double tau = 1.0;
    const int draws = 100000;
    double s_dw = 0.0, s_e = 0.0, s_de = 0.0, s_dw2 = 0.0, s_e2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto b = sample_bundle(lams, 1, tau, 1, coupling, 99, static_cast<std::uint64_t>(i));
        s_dw += b.dW(0, 0);
        s_e += b.E(0, 0);
        s_dw2 += b.dW(0, 0) * b.dW(0, 0);
        s_e2 += b.E(0, 0) * b.E(0, 0);
        s_de += b.dW(0, 0) * b.E(0, 0);
    }
    const double var_dw = s_dw2 / draws, var_e = s_e2 / draws, cov = s_de / draws;
    // moment estimator noise ~ sqrt(2/n) * value; allow 5 sigma
    const double tol = 5.0 * std::sqrt(2.0 / draws);
    REQUIRE(var_dw == Approx(tau).epsilon(tol));
    REQUIRE(var_e == Approx(bundle_var_e(1.0, tau)).epsilon(tol));
    REQUIRE(cov == Approx(bundle_cov_dw_e(1.0, tau)).epsilon(tol));
    REQUIRE(std::abs(s_dw / draws) <= 5.0 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("bundle replay determinism") {
    const std::vector<double> lams{1.0, 4.0, 9.0};
    const auto coupling = identity_coupling(3);
    const auto a = sample_bundle(lams, 16, 0.25, 3, coupling, 1234, 7);
    const auto b = sample_bundle(lams, 16, 0.25, 3, coupling, 1234, 7);
    REQUIRE(a.dw == b.dw);
    REQUIRE(a.e == b.e);
    const auto c = sample_bundle(lams, 16, 0.25, 3, coupling, 1234, 8);
    REQUIRE(a.dw != c.dw);
}

TEST_CASE("gamma norms") {
    const auto op = make_explicit_operator({1.0, 4.0});
    StepProcess zero = StepProcess::zeros(1, 2, 2, 1.0);
    REQUIRE(gamma_half_norm(op, zero.slice(0), 2) == 0.0);

    StepProcess diag = StepProcess::zeros(1, 2, 2, 1.0);
    diag.at(0, 0, 0) = 1.0;
    diag.at(0, 1, 1) = 1.0;
    REQUIRE(gamma_half_norm(op, diag.slice(0), 2) == Approx(std::sqrt(5.0)));

    const auto op9 = make_explicit_operator({9.0}, 4.0);
    StepProcess single = StepProcess::zeros(1, 1, 1, 1.0);
    single.at(0, 0, 0) = 2.0;
    REQUIRE(gamma_half_norm(op9, single.slice(0), 1) == Approx(6.0));
}

TEST_CASE("weighted Lp data norm") {
    const auto op = make_explicit_operator({1.0, 4.0, 9.0});
    const double T = 2.0, tau = 0.25;
    const int n = static_cast<int>(T / tau);
    TestProcessParams params;
    params.scale = 0.7;
    const auto g = make_test_process(TestProcessKind::constant, op, n, tau, params);

    // alpha = 0, constant g: T^{1/p} ||c||
    const double norm_c = gamma_half_norm(op, g.slice(0), 3);
    for (double p : {2.0, 4.0})
        REQUIRE(weighted_lp_data_norm(op, g, p, 0.0) == Approx(std::pow(T, 1.0 / p) * norm_c));

    // alpha = 1, one step on [0,1], p = 2: (int_0^1 t dt)^{1/2} = (1/2)^{1/2}
    const auto op1 = make_explicit_operator({1.0});
    StepProcess one = StepProcess::zeros(1, 1, 1, 1.0);
    one.at(0, 0, 0) = 1.0;
    REQUIRE(weighted_lp_data_norm(op1, one, 2.0, 1.0, 0.0) == Approx(std::sqrt(0.5)));

    // closed-form weights agree with a fine Riemann quadrature oracle
    const double alpha = 0.6, p = 2.0;
    double riemann = 0.0;
    for (int step = 0; step < n; ++step) {
        const double gp = std::pow(gamma_half_norm(op, g.slice(step), 3), p);
        const int sub = 40000;
        for (int i = 0; i < sub; ++i) {
            const double t = (step + (i + 0.5) / sub) * tau;
            riemann += std::pow(t, alpha) * gp * (tau / sub);
        }
    }
    REQUIRE(weighted_lp_data_norm(op, g, p, alpha) == Approx(std::pow(riemann, 1.0 / p)).epsilon(1e-8));

    REQUIRE_THROWS_AS(weighted_lp_data_norm(op, g, 2.0, -1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(weighted_lp_data_norm(op, g, 1.0, 0.0), std::invalid_argument);  // p < 2
}

TEST_CASE("random_adapted integrand is causal") {
    const auto op = make_explicit_operator({1.0, 4.0});
    const auto coupling = identity_coupling(2);
    auto bundle = sample_bundle(op.eigenvalues, 10, 0.5, 2, coupling, 5, 0);
    TestProcessParams params;
    const auto g1 = make_test_process(TestProcessKind::random_adapted, op, 10, 0.5, params, &bundle);
    // perturb the increment at step 5: slices 0..5 must be unchanged
    bundle.dw[5 * 2 + 0] += 100.0;
    const auto g2 = make_test_process(TestProcessKind::random_adapted, op, 10, 0.5, params, &bundle);
    for (int n = 0; n <= 5; ++n)
        for (int k = 0; k < 2; ++k)
            for (int m = 0; m < 2; ++m) REQUIRE(g1.at(n, k, m) == g2.at(n, k, m));
    bool later_differs = false;
    for (int k = 0; k < 2; ++k) later_differs = later_differs || g1.at(6, k, k) != g2.at(6, k, k);
    REQUIRE(later_differs);
}

TEST_CASE("discrete recursion basics") {
    const auto op = make_explicit_operator({2.0});
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    const auto coupling = identity_coupling(1);
    const double tau = 0.5;

    // g = 0 -> Y = 0
    const auto zero = StepProcess::zeros(4, 1, 1, tau);
    const auto b = sample_bundle(op.eigenvalues, 4, tau, 1, coupling, 21, 0);
    const auto traj0 = run_discrete(op, ie, zero, b, tau);
    for (double v : traj0.values) REQUIRE(v == 0.0);

    // N = 1 scalar: Y_1 = r(tau lambda) g_0 dW_0
    StepProcess g = StepProcess::zeros(1, 1, 1, tau);
    g.at(0, 0, 0) = 1.7;
    const auto b1 = sample_bundle(op.eigenvalues, 1, tau, 1, coupling, 22, 3);
    const auto traj1 = run_discrete(op, ie, g, b1, tau);
    REQUIRE(traj1.at(1, 0) == Approx(eval_real(ie, tau * 2.0) * 1.7 * b1.dW(0, 0)));
    REQUIRE(traj1.at(0, 0) == 0.0);
}

TEST_CASE("power-kernel convolution reproduces the recursion bit-for-bit") {
    const auto op = make_explicit_operator({1.0, 4.0, 9.0});
    const auto p12 = build_pade_subdiagonal(1, 2);
    const auto coupling = identity_coupling(3);
    const double tau = 0.125;
    const auto bundle = sample_bundle(op.eigenvalues, 32, tau, 3, coupling, 77, 1);
    TestProcessParams params;
    const auto g = make_test_process(TestProcessKind::mode_decay, op, 32, tau, params);

    const auto direct = run_discrete(op, p12, g, bundle, tau);
    const auto conv = discrete_convolution(op, PowerKernel{scheme_multipliers(op, p12, tau)}, g, bundle, tau);
    REQUIRE(direct.values == conv.values);  // exact equality: shared code path

    // explicit kernel sequence k_n = r(tau lambda)^n agrees mathematically
    for (int k = 0; k < 3; ++k) {
        const double rho = eval_real(p12, tau * op.eigenvalues[static_cast<std::size_t>(k)]);
        std::vector<std::complex<double>> kernel(32);
        double rn = 1.0;
        for (int n = 1; n <= 32; ++n) {
            rn *= rho;
            kernel[static_cast<std::size_t>(n - 1)] = rn;
        }
        StepProcess gk = StepProcess::zeros(32, 1, 1, tau);
        for (int n = 0; n < 32; ++n) gk.at(n, 0, 0) = g.at(n, k, k);
        PathBundle bk;
        bk.steps = 32;
        bk.modes_h = 1;
        bk.modes_x = 1;
        bk.step = tau;
        bk.coupling = identity_coupling(1);
        bk.dw.resize(32);
        bk.e.assign(32, 0.0);
        for (int n = 0; n < 32; ++n) bk.dw[static_cast<std::size_t>(n)] = bundle.dW(n, k);
        const auto rows = discrete_convolution(kernel, gk, bk, ConvolutionVariant::causal);
        for (int n = 0; n <= 32; ++n)
            REQUIRE(rows[static_cast<std::size_t>(n)].real() ==
                    Approx(direct.at(n, k)).epsilon(1e-12).margin(1e-14));
    }
}

TEST_CASE("kernel delta and zero conventions") {
    const auto op = make_explicit_operator({1.0});
    const double tau = 0.5;
    const auto bundle = sample_bundle(op.eigenvalues, 8, tau, 1, identity_coupling(1), 31, 0);
    StepProcess g = StepProcess::zeros(8, 1, 1, tau);
    for (int n = 0; n < 8; ++n) g.at(n, 0, 0) = n + 1.0;

    // kernel = delta_{n,1}: output_n = Delta_{n-1} I_g
    std::vector<std::complex<double>> delta{1.0};
    const auto rows = discrete_convolution(delta, g, bundle, ConvolutionVariant::causal);
    for (int n = 1; n <= 8; ++n)
        REQUIRE(rows[static_cast<std::size_t>(n)].real() ==
                Approx(g.at(n - 1, 0, 0) * bundle.dW(n - 1, 0)));

    // anticausal with zero kernel -> 0
    std::vector<std::complex<double>> zero_kernel(8, 0.0);
    for (const auto& v : discrete_convolution(zero_kernel, g, bundle, ConvolutionVariant::anticausal))
        REQUIRE(v == std::complex<double>(0.0));
}

TEST_CASE("mild solution: flow property and variance") {
    const auto op = make_explicit_operator({2.0});
    const auto coupling = identity_coupling(1);
    const double tau = 0.25;

    // g supported on [0, tau): y(t_n) = e^{-lambda (t_n - tau)} y(tau)
    StepProcess g = StepProcess::zeros(8, 1, 1, tau);
    g.at(0, 0, 0) = 3.0;
    const auto bundle = sample_bundle(op.eigenvalues, 8, tau, 1, coupling, 41, 2);
    const auto mild = run_mild_exact(op, g, bundle, tau);
    for (int n = 1; n <= 8; ++n) {
        const double expected = std::exp(-2.0 * (n - 1) * tau) * mild.at(1, 0);
        REQUIRE(mild.at(n, 0) == Approx(expected).epsilon(1e-12));
    }

    // n = 1 variance: Var(y(tau)) = g^2 (1 - e^{-2 lambda tau})/(2 lambda)
    const int draws = 40000;
    double s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto b = sample_bundle(op.eigenvalues, 1, tau, 1, coupling, 43, static_cast<std::uint64_t>(i));
        StepProcess g1 = StepProcess::zeros(1, 1, 1, tau);
        g1.at(0, 0, 0) = 3.0;
        const auto y = run_mild_exact(op, g1, b, tau);
        s2 += y.at(1, 0) * y.at(1, 0);
    }
    const double target = 9.0 * bundle_var_e(2.0, tau);
    REQUIRE(s2 / draws == Approx(target).epsilon(5.0 * std::sqrt(2.0 / draws)));

    // non-diagonal coupling is rejected
    StepProcess bad = StepProcess::zeros(2, 2, 2, tau);
    bad.at(0, 0, 1) = 1.0;
    const auto op2 = make_explicit_operator({1.0, 2.0});
    const auto b2 = sample_bundle(op2.eigenvalues, 2, tau, 2, identity_coupling(2), 44, 0);
    REQUIRE_THROWS_AS(run_mild_exact(op2, bad, b2, tau), std::invalid_argument);
}

TEST_CASE("pathwise coupling error matches the Ito-isometry oracle and shrinks with tau") {
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    const auto op = make_explicit_operator({1.0});
    const double T = 1.0;

    auto closed_form_err2 = [&](double tau) {
        // E|Y_N - y(T)|^2 for g = 1: per-step contributions over j < N
        const int n_steps = static_cast<int>(std::lround(T / tau));
        const double rho = eval_real(ie, tau);
        const double V = bundle_var_e(1.0, tau), C = bundle_cov_dw_e(1.0, tau);
        double acc = 0.0;
        for (int j = 0; j < n_steps; ++j) {
            const int i = n_steps - j;
            const double a = std::pow(rho, i);                          // dW weight in Y_N
            const double b = std::exp(-(T - (j + 1) * tau));            // E weight in y(T)
            acc += a * a * tau + b * b * V - 2.0 * a * b * C;
        }
        return acc;
    };

    auto mc_err2 = [&](double tau, int draws) {
        const int n_steps = static_cast<int>(std::lround(T / tau));
        StepProcess g = StepProcess::zeros(n_steps, 1, 1, tau);
        for (int n = 0; n < n_steps; ++n) g.at(n, 0, 0) = 1.0;
        double acc = 0.0;
        for (int i = 0; i < draws; ++i) {
            const auto b = sample_bundle(op.eigenvalues, n_steps, tau, 1, identity_coupling(1), 50,
                                         static_cast<std::uint64_t>(i));
            const auto y = run_mild_exact(op, g, b, tau);
            const auto Y = run_discrete(op, ie, g, b, tau);
            const double d = Y.at(n_steps, 0) - y.at(n_steps, 0);
            acc += d * d;
        }
        return acc / draws;
    };

    const double tau_a = 1e-3, tau_b = 1e-4;  // lambda tau in {1e-3, 1e-4}
    const double mc_a = mc_err2(tau_a, 2000);
    const double cf_a = closed_form_err2(tau_a);
    REQUIRE(mc_a == Approx(cf_a).epsilon(5.0 * std::sqrt(2.0 / 2000)));
    // coupling error vanishes at the closed-form rate as tau -> 0
    const double cf_b = closed_form_err2(tau_b);
    REQUIRE(cf_b < cf_a);
    const double mc_b = mc_err2(tau_b, 500);
    REQUIRE(mc_b == Approx(cf_b).epsilon(5.0 * std::sqrt(2.0 / 500)));
}

TEST_CASE("trajectories are additive in superposed integrands") {
    const auto op = make_explicit_operator({1.0, 3.0});
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    const double tau = 0.25;
    const auto bundle = sample_bundle(op.eigenvalues, 8, tau, 2, identity_coupling(2), 61, 0);
    TestProcessParams p1, p2;
    p1.decay = 1.0;
    p2.decay = 2.0;
    auto ga = make_test_process(TestProcessKind::mode_decay, op, 8, tau, p1);
    auto gb = make_test_process(TestProcessKind::alternating, op, 8, tau, p2);
    StepProcess gsum = ga;
    for (std::size_t i = 0; i < gsum.values.size(); ++i) gsum.values[i] += gb.values[i];

    const auto ta = run_discrete(op, ie, ga, bundle, tau);
    const auto tb = run_discrete(op, ie, gb, bundle, tau);
    const auto ts = run_discrete(op, ie, gsum, bundle, tau);
    for (std::size_t i = 0; i < ts.values.size(); ++i)
        REQUIRE(ts.values[i] == Approx(ta.values[i] + tb.values[i]).epsilon(1e-12).margin(1e-300));
}
