#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <numbers>

#include "dsmr/rational.hpp"

using namespace dsmr;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<SchemeFunction> admissible_catalog() {
    return {builtin_scheme(BuiltinScheme::implicit_euler), build_pade_subdiagonal(0, 2),
            build_pade_subdiagonal(1, 2), build_pade_subdiagonal(1, 3),
            builtin_scheme(BuiltinScheme::pade_0_3)};
}
}  // namespace

TEST_CASE("pade construction matches the closed coefficient formulas") {
    const auto ie = build_pade_subdiagonal(0, 1);
    REQUIRE(ie.numerator == std::vector<double>{1.0});
    REQUIRE(ie.denominator == std::vector<double>{1.0, 1.0});
    REQUIRE(ie.declared_order == 1);

    const auto p02 = build_pade_subdiagonal(0, 2);
    REQUIRE(p02.denominator == std::vector<double>{1.0, 1.0, 0.5});
    REQUIRE(p02.declared_order == 2);

    const auto p12 = build_pade_subdiagonal(1, 2);
    REQUIRE(p12.declared_order == 3);
    REQUIRE(p12.numerator[1] == Approx(-1.0 / 3.0).epsilon(1e-15));
    REQUIRE(p12.denominator == std::vector<double>{1.0, 2.0 / 3.0, 1.0 / 6.0});

    REQUIRE(p02.gamma_infinity == std::complex<double>(0.0, 0.0));
    REQUIRE_THROWS_AS(build_pade_subdiagonal(0, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(build_pade_subdiagonal(5, 6), std::invalid_argument);
    REQUIRE_THROWS_AS(build_pade_subdiagonal(2, 2), std::invalid_argument);
}

TEST_CASE("builtin schemes carry the right metadata") {
    const auto cn = builtin_scheme(BuiltinScheme::crank_nicolson);
    REQUIRE(cn.gamma_infinity.real() == Approx(-1.0));
    REQUIRE_FALSE(cn.dsmr_admissible());

    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    REQUIRE(ie.declared_order == 1);
    REQUIRE(ie.declared_angle == Approx(kPi / 2));

    REQUIRE(builtin_scheme("pade_1_2").declared_order == 3);
    REQUIRE_THROWS_AS(builtin_scheme("no_such_scheme"), std::invalid_argument);
}

TEST_CASE("eval: Horner evaluation and pole rejection") {
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    REQUIRE(eval_real(ie, 1.0) == Approx(0.5));
    REQUIRE(eval(ie, {0.0, 0.0}) == std::complex<double>(1.0, 0.0));

    const auto p02 = build_pade_subdiagonal(0, 2);
    REQUIRE(eval_real(p02, 2.0) == Approx(0.2));

    for (const auto& s : admissible_catalog())
        REQUIRE(eval(s, {0.0, 0.0}).real() == 1.0);  // consistency forces r(0) = 1 exactly

    REQUIRE_THROWS_AS(eval(ie, {-1.0, 0.0}), std::domain_error);
}

TEST_CASE("consistency order detection (slope fit + series cross-check)") {
    REQUIRE(detect_consistency_order(builtin_scheme(BuiltinScheme::implicit_euler)) == 1);
    REQUIRE(detect_consistency_order(build_pade_subdiagonal(0, 2)) == 2);
    REQUIRE(detect_consistency_order(builtin_scheme(BuiltinScheme::pade_0_3)) == 3);
    REQUIRE_FALSE(detect_consistency_order(builtin_scheme(BuiltinScheme::exponential_euler)).has_value());
    REQUIRE(detect_consistency_order(builtin_scheme(BuiltinScheme::explicit_euler)) == 1);

    // detect(build(n, n+1)) = 2n+1 and detect(build(n, n+2)) = 2n+2 for n <= 2
    for (int n = 0; n <= 2; ++n) {
        REQUIRE(detect_consistency_order(build_pade_subdiagonal(n, n + 1)) == 2 * n + 1);
        REQUIRE(detect_consistency_order(build_pade_subdiagonal(n, n + 2)) == 2 * n + 2);
    }
}

TEST_CASE("stability checks on the catalog") {
    StabilityGrid quick;
    quick.boundary_points_per_ray = 2000;

    for (const auto& s : {builtin_scheme(BuiltinScheme::implicit_euler), build_pade_subdiagonal(0, 2),
                          build_pade_subdiagonal(1, 2), build_pade_subdiagonal(1, 3)})
        REQUIRE(check_stability(s, kPi / 2, quick).passes);

    const auto cn = builtin_scheme(BuiltinScheme::crank_nicolson);
    const auto cn_rep = check_stability(cn, kPi / 2, quick);
    REQUIRE(cn_rep.passes);
    REQUIRE(cn_rep.rinf_modulus == Approx(1.0));  // |r(inf)| = 1: stable but not admissible

    const auto p03 = builtin_scheme(BuiltinScheme::pade_0_3);
    REQUIRE_FALSE(check_stability(p03, kPi / 2, quick).passes);
    REQUIRE(check_stability(p03, 88.0 * kPi / 180.0, quick).passes);

    const auto ee = builtin_scheme(BuiltinScheme::explicit_euler);
    const auto ee_rep = check_stability(ee, kPi / 2, quick);
    REQUIRE_FALSE(ee_rep.passes);
    REQUIRE(ee_rep.max_modulus_boundary > 1.5);  // |1 - z| blows up along the rays

    // pole inside the sector fails immediately with the pole location
    SchemeFunction bad;
    bad.name = "unstable_resolvent";
    bad.numerator = {1.0};
    bad.denominator = {1.0, -1.0};  // pole at z = +1
    const auto bad_rep = check_stability(bad, kPi / 2, quick);
    REQUIRE_FALSE(bad_rep.passes);
    REQUIRE(bad_rep.pole_in_sector.has_value());
    REQUIRE(bad_rep.pole_in_sector->real() == Approx(1.0));
}

TEST_CASE("stability monotonicity in the angle") {
    StabilityGrid quick;
    quick.boundary_points_per_ray = 1000;
    quick.interior_moduli = 10;
    const auto p03 = builtin_scheme(BuiltinScheme::pade_0_3);
    const double theta0 = 88.0 * kPi / 180.0;
    REQUIRE(check_stability(p03, theta0, quick).passes);
    for (double f : {0.9, 0.7, 0.5, 0.25})
        REQUIRE(check_stability(p03, f * theta0, quick).passes);
}

TEST_CASE("strict interior contraction for admissible schemes") {
    StabilityGrid quick;
    quick.boundary_points_per_ray = 500;
    for (const auto& s : admissible_catalog()) {
        const double theta = s.declared_angle.value();
        const auto rep = check_stability(s, theta, quick);
        REQUIRE(rep.max_modulus_interior_sample < 1.0 - 1e-12);
    }
}

TEST_CASE("partial fractions: catalog decompositions and reconstruction") {
    const auto ie_pf = partial_fractions(builtin_scheme(BuiltinScheme::implicit_euler));
    REQUIRE(ie_pf.gamma_infinity == std::complex<double>(0.0, 0.0));
    REQUIRE(ie_pf.poles.size() == 1);
    REQUIRE(-ie_pf.poles[0].location.real() == Approx(1.0));  // a_1 = 1
    REQUIRE(ie_pf.residues.size() == 1);
    REQUIRE(ie_pf.residues[0].coeff.real() == Approx(1.0));

    const auto p02_pf = partial_fractions(build_pade_subdiagonal(0, 2));
    REQUIRE(p02_pf.poles.size() == 2);
    for (const auto& pole : p02_pf.poles) {
        REQUIRE(pole.location.real() == Approx(-1.0).margin(1e-12));
        REQUIRE(std::abs(pole.location.imag()) == Approx(1.0).margin(1e-12));
    }

    const auto cn_pf = partial_fractions(builtin_scheme(BuiltinScheme::crank_nicolson));
    REQUIRE(cn_pf.gamma_infinity.real() == Approx(-1.0));
    REQUIRE(-cn_pf.poles[0].location.real() == Approx(2.0));
    REQUIRE(cn_pf.residues[0].coeff.real() == Approx(4.0));

    // reconstruction within 1e-10 relative error on a pole-free grid
    auto catalog = admissible_catalog();
    catalog.push_back(builtin_scheme(BuiltinScheme::crank_nicolson));
    for (const auto& s : catalog) {
        const auto pf = partial_fractions(s);
        for (int i = 0; i < 100; ++i) {
            const double m = std::pow(10.0, -3.0 + 6.0 * i / 99.0);
            const std::complex<double> z = std::polar(m, 0.4);
            const auto direct = eval(s, z);
            const auto recon = eval_partial_fractions(pf, z);
            REQUIRE(std::abs(direct - recon) <= 1e-10 * (1.0 + std::abs(direct)));
        }
    }
}

TEST_CASE("partial fractions: multiple pole via contour integrals") {
    SchemeFunction s;  // r(z) = 1/(1+z)^2, double pole at -1
    s.name = "double_pole";
    s.numerator = {1.0};
    s.denominator = {1.0, 2.0, 1.0};
    const auto pf = partial_fractions(s);
    REQUIRE(pf.poles.size() == 1);
    REQUIRE(pf.poles[0].order == 2);
    for (int i = 0; i < 50; ++i) {
        const std::complex<double> z = std::polar(0.1 + 0.2 * i, -0.3);
        REQUIRE(std::abs(eval(s, z) - eval_partial_fractions(pf, z)) <= 1e-10 * (1.0 + std::abs(eval(s, z))));
    }
    REQUIRE_THROWS_AS(partial_fractions(builtin_scheme(BuiltinScheme::explicit_euler)),
                      std::invalid_argument);
}

TEST_CASE("decay estimates pass for implicit Euler at nu = pi/4") {
    DecayGrid quick;
    quick.moduli_per_level = 40;
    quick.n_points = 16;
    const auto reports = verify_decay_estimates(builtin_scheme(BuiltinScheme::implicit_euler), kPi / 4, 64,
                                                quick);
    REQUIRE(reports.size() == 5);
    for (const auto& rep : reports) {
        CAPTURE(to_string(rep.inequality_id), rep.fitted_C, rep.refinement_ratio);
        REQUIRE(rep.passes);
        REQUIRE(std::isfinite(rep.fitted_C));
    }
    // scalar Lemma-type bound at alpha = 1: sup |z r(z)| <= 1/cos(nu) on the sector
    const auto& fps = reports[4];
    REQUIRE(fps.inequality_id == EstimateInequality::frac_power_scheme);
    REQUIRE(fps.fitted_C <= 1.0 / std::cos(kPi / 4) + 1e-9);
}

TEST_CASE("decay estimates: exponential scheme difference is identically zero") {
    DecayGrid quick;
    quick.moduli_per_level = 30;
    quick.n_points = 12;
    const auto reports =
        verify_decay_estimates(builtin_scheme(BuiltinScheme::exponential_euler), kPi / 4, 32, quick);
    REQUIRE(reports[0].fitted_C == 0.0);
    REQUIRE(reports[3].fitted_C == 0.0);
    REQUIRE(reports[1].passes);
    REQUIRE(reports[2].passes);
}

TEST_CASE("decay estimates reject bad parameters") {
    const auto ie = builtin_scheme(BuiltinScheme::implicit_euler);
    REQUIRE_THROWS_AS(verify_decay_estimates(ie, kPi / 4, 8), std::invalid_argument);   // n_max < 32
    REQUIRE_THROWS_AS(verify_decay_estimates(builtin_scheme(BuiltinScheme::crank_nicolson), kPi / 4, 64),
                      std::invalid_argument);  // r(inf) != 0
    const auto p03 = builtin_scheme(BuiltinScheme::pade_0_3);
    REQUIRE_THROWS_AS(verify_decay_estimates(p03, kPi / 2 - 1e-4, 64),
                      std::invalid_argument);  // nu above the declared angle
}
