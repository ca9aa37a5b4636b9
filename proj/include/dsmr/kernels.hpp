#pragma once

// The kernel class K_tau = { (k_n) : k_n -> 0, sum_n sqrt(n tau) |k_{n+1}-k_n| <= 1 },
// the exponential/rational kernel families with their phi- and tail-variant
// forms, exact class-sum evaluation with certified truncation bounds, and
// uniform-boundedness probing of the induced discrete convolutions.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsmr/detail/parallel.hpp"
#include "dsmr/detail/special.hpp"
#include "dsmr/evolve.hpp"
#include "dsmr/noise.hpp"
#include "dsmr/norms.hpp"
#include "dsmr/rational.hpp"

namespace dsmr {

enum class KernelFamily {
    exp_basic,         // k_n = lambda^{1/2} e^{-n tau lambda}
    exp_phi,           // exp_basic scaled by phi(tau, lambda)
    exp_variant,       // k_n = sum_{j>n} lambda^{1/2} (tau lambda)^{-sigma} e^{-(j-n) tau lambda} a_j
    rational_basic,    // k_n = lambda^{1/2} r(tau lambda)^n
    rational_phi,
    rational_variant,
    j_reference,       // k_n = 1_{1<=n<=m} / sqrt(m tau)
    custom,            // psi-built kernels; variant_form selects the tail form
};

struct ASeqSpec {
    enum class Kind { power_decay, psi } kind = Kind::power_decay;
    double b = 1.0;  // decay bound: |a_j| <= b / j^{1+sigma}
    double s = 0.25; // psi slice parameter in [0, 1)
};

struct KernelSpec {
    KernelFamily family = KernelFamily::exp_basic;
    double tau = 1.0;
    std::complex<double> lambda{1.0, 0.0};
    double nu = std::numbers::pi / 4.0;
    double sigma = 0.25;  // in (0, 1/2)
    ASeqSpec a_seq;
    std::optional<SchemeFunction> scheme;  // rational families
    int m = 1;                             // j_reference plateau width
    bool variant_form = false;             // custom only

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("KernelSpec: tau > 0");
        if (!(sigma > 0.0) || !(sigma < 0.5)) throw std::invalid_argument("KernelSpec: sigma in (0, 1/2)");
        if (std::abs(std::arg(lambda)) > nu + 1e-12)
            throw std::invalid_argument("KernelSpec: lambda outside the sector Sigma_nu");
        const bool rational = family == KernelFamily::rational_basic ||
                              family == KernelFamily::rational_phi ||
                              family == KernelFamily::rational_variant ||
                              (family == KernelFamily::custom && scheme.has_value());
        if (rational && !scheme.has_value())
            throw std::invalid_argument("KernelSpec: rational family without a scheme");
        if (rational && !scheme->dsmr_admissible())
            throw std::invalid_argument("KernelSpec: scheme must satisfy r(infinity) = 0");
        if (family == KernelFamily::j_reference && m < 1)
            throw std::invalid_argument("KernelSpec: j_reference needs m >= 1");
    }
};

struct KtauSum {
    double sum = 0.0;
    double tail_bound = 0.0;
    bool member = false;  // sum + tail <= 1 (+1e-12)
};

namespace detail_kernels {

struct StepFactor {
    std::complex<double> w;  // e^{-z} or r(z)
    double rho;              // |w| < 1
    double mu;               // -log rho
};

inline StepFactor step_factor(const KernelSpec& spec) {
    const std::complex<double> z = spec.tau * spec.lambda;
    StepFactor f;
    const bool rational = spec.scheme.has_value() && !spec.scheme->is_exponential();
    f.w = rational ? eval(*spec.scheme, z) : std::exp(-z);
    f.rho = std::abs(f.w);
    if (!(f.rho < 1.0))
        throw std::runtime_error("kernels: |step factor| >= 1 at z = (" + std::to_string(z.real()) + "," +
                                 std::to_string(z.imag()) + ")");
    f.mu = -std::log(f.rho);
    return f;
}

/// 1 - w computed without cancellation for the exponential factor.
inline std::complex<double> one_minus_w(const KernelSpec& spec, const StepFactor& f) {
    const bool rational = spec.scheme.has_value() && !spec.scheme->is_exponential();
    const std::complex<double> z = spec.tau * spec.lambda;
    if (!rational && std::abs(z) < 1e-4) {
        // 1 - e^{-z} = z - z^2/2 + z^3/6 - z^4/24
        return z * (1.0 - z * (0.5 - z * (1.0 / 6.0 - z / 24.0)));
    }
    return 1.0 - f.w;
}

/// a_j evaluator with an O(1) multiplicative fast path for large j.
class ASeq {
  public:
    ASeq(const ASeqSpec& spec, double sigma) : spec_(spec), sigma_(sigma) {
        if (spec.kind == ASeqSpec::Kind::psi) {
            const double u = 1.0 - spec.s;
            a0_moment_ = u * u / 2.0;
        }
    }

    double at(long j) const {
        if (spec_.kind == ASeqSpec::Kind::power_decay)
            return spec_.b * std::pow(static_cast<double>(j), -1.0 - sigma_);
        return detail::psi_weight(static_cast<double>(j), spec_.s, sigma_);
    }

    /// |a_j| <= bound_b() / j^{1+sigma} for all j >= 1.
    double bound_b() const {
        return spec_.kind == ASeqSpec::Kind::power_decay ? spec_.b : a0_moment_ * 1.05 + 0.05;
    }

    /// |a_j - a_{j+1}| <= diff_bound() / j^{2+sigma} for all j >= 1.
    double diff_bound() const {
        if (spec_.kind == ASeqSpec::Kind::power_decay) return spec_.b * (1.0 + sigma_) * 2.0;
        return a0_moment_ * (1.0 + sigma_) * 2.5;
    }

    /// Exact value of sum_{j > J} a_j (Euler-Maclaurin tails).
    detail::TailValue tail_sum(long J) const {
        if (spec_.kind == ASeqSpec::Kind::power_decay) {
            auto t = detail::hurwitz_tail(1.0 + sigma_, static_cast<double>(J + 1));
            return {spec_.b * t.value, spec_.b * t.error_bound};
        }
        // sum_{j>J} psi(j,s) = int_0^{1-s} (1-s-r) * hurwitz_tail(1+sigma, J+1+r) dr,
        // 16-point Gauss-Legendre (the integrand is smooth in r).
        static constexpr std::array<double, 8> gx = {0.0950125098376374, 0.2816035507792589,
                                                     0.4580167776572274, 0.6178762444026438,
                                                     0.7554044083550030, 0.8656312023878318,
                                                     0.9445750230732326, 0.9894009349916499};
        static constexpr std::array<double, 8> gw = {0.1894506104550685, 0.1826034150449236,
                                                     0.1691565193950025, 0.1495959888165767,
                                                     0.1246289712555339, 0.0951585116824928,
                                                     0.0622535239386479, 0.0271524594117541};
        const double u = 1.0 - spec_.s;
        double acc = 0.0, err = 0.0;
        for (int i = 0; i < 8; ++i) {
            for (double sign : {-1.0, 1.0}) {
                const double r = 0.5 * u * (1.0 + sign * gx[static_cast<std::size_t>(i)]);
                const auto t = detail::hurwitz_tail(1.0 + sigma_, static_cast<double>(J + 1) + r);
                acc += gw[static_cast<std::size_t>(i)] * (u - r) * t.value;
                err += gw[static_cast<std::size_t>(i)] * (u - r) * t.error_bound;
            }
        }
        return {0.5 * u * acc, 0.5 * u * err + 1e-13 * std::abs(acc)};
    }

    const ASeqSpec& spec() const { return spec_; }
    double sigma() const { return sigma_; }

  private:
    ASeqSpec spec_;
    double sigma_;
    double a0_moment_ = 0.0;
};

/// Tracks j^{-(1+sigma)} under unit steps of j without pow() in the bulk.
struct PowTracker {
    double e = 1.25;  // 1 + sigma
    long j = 1;
    double pw = 1.0;

    void init(double exponent, long j0) {
        e = exponent;
        j = j0;
        pw = std::pow(static_cast<double>(j0), -e);
    }
    void forward() {  // multiply by (1 + 1/j)^{-e}, then ++j
        const double x = 1.0 / static_cast<double>(j);
        const double f =
            j >= 512 ? 1.0 - e * x * (1.0 - (e + 1.0) * 0.5 * x *
                                      (1.0 - (e + 2.0) / 3.0 * x * (1.0 - (e + 3.0) * 0.25 * x)))
                     : std::pow(static_cast<double>(j) / static_cast<double>(j + 1), e);
        pw *= f;
        ++j;
    }
    void backward() {  // multiply by (1 + 1/(j-1))^{+e}, then --j
        const long jm = j - 1;
        const double x = 1.0 / static_cast<double>(jm);
        const double f =
            jm >= 512 ? 1.0 + e * x * (1.0 + (e - 1.0) * 0.5 * x *
                                       (1.0 + (e - 2.0) / 3.0 * x * (1.0 + (e - 3.0) * 0.25 * x)))
                      : std::pow(static_cast<double>(j) / static_cast<double>(jm), e);
        pw *= f;
        --j;
    }
};

/// a_j under a running PowTracker positioned at j.
inline double aseq_value(const ASeq& a, const PowTracker& t) {
    if (a.spec().kind == ASeqSpec::Kind::power_decay) return a.spec().b * t.pw;
    if (t.j <= 64) return detail::psi_weight(static_cast<double>(t.j), a.spec().s, a.sigma());
    // Asymptotic bracket of psi(j, s) around j^{-1-sigma}.
    const double u = 1.0 - a.spec().s;
    const double x = 1.0 / static_cast<double>(t.j);
    double acc = 0.0, coef = 1.0, xp = 1.0;
    for (int i = 0; i < 6; ++i) {
        const double moment = std::pow(u, i + 2) / ((i + 1.0) * (i + 2.0));
        acc += coef * moment * xp;
        coef *= -(1.0 + a.sigma() + i) / (i + 1.0);
        xp *= x;
    }
    return acc * t.pw;
}

/// phi(tau, lambda) = sum_j a_j (w^j - 1) / z^sigma, with the constant part
/// of the tail evaluated analytically and the oscillatory part bounded
/// geometrically.
struct PhiValue {
    std::complex<double> value;
    double error_bound;
};

inline PhiValue phi_factor(const KernelSpec& spec, const StepFactor& f, std::int64_t max_terms) {
    const ASeq a(spec.a_seq, spec.sigma);
    const std::complex<double> z = spec.tau * spec.lambda;
    const double zs = std::pow(std::abs(z), spec.sigma);  // |z^sigma|
    const std::int64_t J = std::min<std::int64_t>(
        max_terms, std::max<std::int64_t>(64, static_cast<std::int64_t>(std::ceil(45.0 / f.mu))));
    std::complex<double> sum_w = 0.0;
    double sum_a = 0.0;
    std::complex<double> wj = 1.0;
    PowTracker t;
    t.init(1.0 + spec.sigma, 1);
    double aj = aseq_value(a, t);
    for (std::int64_t j = 1; j <= J; ++j) {
        wj *= f.w;
        sum_w += aj * wj;
        sum_a += aj;
        t.forward();
        aj = aseq_value(a, t);
    }
    const auto tail = a.tail_sum(J);
    double err = tail.error_bound;
    // | sum_{j>J} a_j w^j | <= a_{J+1} rho^{J+1} / (1 - rho), or the full
    // constant tail when the geometric budget was exhausted.
    const double geo = std::pow(f.rho, static_cast<double>(J) + 1.0);
    err += std::min(std::abs(aj) * geo / (1.0 - f.rho), tail.value + tail.error_bound);
    PhiValue out;
    out.value = (sum_w - (sum_a + tail.value)) / std::pow(z, spec.sigma);
    out.error_bound = err / zs;
    return out;
}

}  // namespace detail_kernels

// ---------------------------------------------------------------------------
// Class-sum evaluation

/// sum_{n >= 1} sqrt(n tau) |k_{n+1} - k_n| with a certified truncation bound.
///
/// Basic and phi families reduce to a sqrt-polylog closed form, exact over
/// the whole grid. Tail-variant families run the backward recurrence
/// I_n = w (a_{n+1} + I_{n+1}) from far beyond the reported range, so the
/// only truncation error is the analytic bound on the n-tail (algebraic in n
/// once the geometric window has closed; reported, not hidden).
inline KtauSum ktau_sum(const KernelSpec& spec, std::int64_t max_terms = (1LL << 26)) {
    spec.validate();
    KtauSum out;

    if (spec.family == KernelFamily::j_reference) {
        const double sm = std::sqrt(spec.m * spec.tau);
        out.sum = sm * (1.0 / sm);  // only the step at n = m contributes
        out.tail_bound = 0.0;
        out.member = out.sum <= 1.0 + 1e-12;
        return out;
    }

    KernelSpec routed = spec;
    if (spec.family == KernelFamily::custom) {
        routed.a_seq.kind = ASeqSpec::Kind::psi;
        const bool rational = spec.scheme.has_value();
        routed.family = spec.variant_form
                            ? (rational ? KernelFamily::rational_variant : KernelFamily::exp_variant)
                            : (rational ? KernelFamily::rational_phi : KernelFamily::exp_phi);
        return ktau_sum(routed, max_terms);
    }

    const auto f = detail_kernels::step_factor(spec);
    const double sqrt_lam = std::sqrt(std::abs(spec.lambda));
    const double sqrt_tau = std::sqrt(spec.tau);

    const bool basic = spec.family == KernelFamily::exp_basic || spec.family == KernelFamily::rational_basic;
    const bool phi = spec.family == KernelFamily::exp_phi || spec.family == KernelFamily::rational_phi;
    if (basic || phi) {
        const auto li = detail::sqrt_polylog(f.rho);
        const double base = sqrt_tau * sqrt_lam * std::abs(detail_kernels::one_minus_w(spec, f));
        double sum = base * li.value;
        double err = base * li.error_bound + sum * 1e-13;
        if (phi) {
            const auto pv = detail_kernels::phi_factor(spec, f, max_terms);
            err = err * std::abs(pv.value) + sum * pv.error_bound;
            sum *= std::abs(pv.value);
        }
        out.sum = sum;
        out.tail_bound = err;
        out.member = out.sum + out.tail_bound <= 1.0 + 1e-12;
        return out;
    }

    // Tail-variant families.
    const detail_kernels::ASeq a(spec.a_seq, spec.sigma);
    const double scale = sqrt_lam * std::pow(std::abs(spec.tau * spec.lambda), -spec.sigma);
    const std::int64_t n_report = std::min<std::int64_t>(
        max_terms / 2, std::max<std::int64_t>(4096, static_cast<std::int64_t>(std::ceil(96.0 / f.mu))));
    const std::int64_t n_far = 2 * n_report;

    std::complex<double> inner = 0.0;  // I_{n+1} while processing n
    double sum = 0.0;
    detail_kernels::PowTracker t;
    t.init(1.0 + spec.sigma, n_far + 1);
    const double sqt = std::sqrt(spec.tau);
    for (std::int64_t n = n_far; n >= 1; --n) {
        // a_{n+1} entering I_n = w (a_{n+1} + I_{n+1})
        const std::complex<double> next_inner = f.w * (detail_kernels::aseq_value(a, t) + inner);
        if (n <= n_report) sum += sqt * std::sqrt(static_cast<double>(n)) * std::abs(next_inner - inner);
        inner = next_inner;
        t.backward();  // now positioned at a_{(n-1)+1}
    }
    out.sum = scale * sum;

    // n-tail: |I_n - I_{n+1}| = |sum_{j>n} w^{j-n} (a_j - a_{j+1})|
    //        <= diff_bound n^{-2-sigma} rho/(1-rho), summed against sqrt(n tau).
    const auto hw = detail::hurwitz_tail(1.5 + spec.sigma, static_cast<double>(n_report + 1));
    double tail = scale * sqrt_tau * a.diff_bound() * (f.rho / (1.0 - f.rho)) * (hw.value + hw.error_bound);
    // Start-value truncation: suppressed by rho^{n_far - n_report} <= e^{-48}.
    tail += scale * std::exp(-48.0) * (1.0 + std::abs(inner)) * std::sqrt(static_cast<double>(n_report) * spec.tau) * 4.0;
    tail += out.sum * 1e-12;
    out.tail_bound = tail;
    out.member = out.sum + out.tail_bound <= 1.0 + 1e-12;
    return out;
}

// ---------------------------------------------------------------------------
// Kernel materialization (for convolution probes)

/// k_1 .. k_count as a complex sequence.
inline std::vector<std::complex<double>> materialize_kernel(const KernelSpec& spec, int count,
                                                            std::int64_t max_terms = (1LL << 26)) {
    spec.validate();
    std::vector<std::complex<double>> k(static_cast<std::size_t>(count), 0.0);
    if (spec.family == KernelFamily::j_reference) {
        const double v = 1.0 / std::sqrt(spec.m * spec.tau);
        for (int n = 1; n <= std::min(count, spec.m); ++n) k[static_cast<std::size_t>(n - 1)] = v;
        return k;
    }
    KernelSpec routed = spec;
    if (spec.family == KernelFamily::custom) {
        routed.a_seq.kind = ASeqSpec::Kind::psi;
        const bool rational = spec.scheme.has_value();
        routed.family = spec.variant_form
                            ? (rational ? KernelFamily::rational_variant : KernelFamily::exp_variant)
                            : (rational ? KernelFamily::rational_phi : KernelFamily::exp_phi);
        return materialize_kernel(routed, count, max_terms);
    }

    const auto f = detail_kernels::step_factor(spec);
    const std::complex<double> sqrt_lam = std::sqrt(spec.lambda);

    switch (routed.family) {
        case KernelFamily::exp_basic:
        case KernelFamily::rational_basic:
        case KernelFamily::exp_phi:
        case KernelFamily::rational_phi: {
            std::complex<double> factor = sqrt_lam;
            if (routed.family == KernelFamily::exp_phi || routed.family == KernelFamily::rational_phi)
                factor *= detail_kernels::phi_factor(spec, f, max_terms).value;
            std::complex<double> wn = 1.0;
            for (int n = 1; n <= count; ++n) {
                wn *= f.w;
                k[static_cast<std::size_t>(n - 1)] = factor * wn;
            }
            return k;
        }
        case KernelFamily::exp_variant:
        case KernelFamily::rational_variant: {
            const detail_kernels::ASeq a(spec.a_seq, spec.sigma);
            const std::complex<double> scale =
                sqrt_lam * std::pow(spec.tau * spec.lambda, -spec.sigma);
            const std::int64_t n_far = std::min<std::int64_t>(
                max_terms,
                count + std::max<std::int64_t>(256, static_cast<std::int64_t>(std::ceil(48.0 / f.mu))));
            std::complex<double> inner = 0.0;
            detail_kernels::PowTracker t;
            t.init(1.0 + spec.sigma, n_far + 1);
            for (std::int64_t n = n_far; n >= 1; --n) {
                inner = f.w * (detail_kernels::aseq_value(a, t) + inner);
                if (n <= count) k[static_cast<std::size_t>(n - 1)] = scale * inner;
                t.backward();
            }
            return k;
        }
        default:
            throw std::logic_error("materialize_kernel: unhandled family");
    }
}

// ---------------------------------------------------------------------------
// Family uniformity scan

struct FamilyUniformReport {
    KernelFamily family{};
    double nu = 0.0;
    double sigma = 0.0;
    double sup_normalized = 0.0;        // sup over grid of (sum + tail)/b, refined level
    double sup_normalized_coarse = 0.0;
    double refinement_ratio = 0.0;
    double worst_abs_z = 0.0;
    double worst_arg_z = 0.0;
    long grid_points = 0;
    bool passes = false;
    std::string grid_spec;
};

inline std::vector<double> default_tau_grid() {
    std::vector<double> g;
    for (int k = -12; k <= 4; ++k) g.push_back(std::pow(2.0, k));
    return g;
}

inline std::vector<double> default_lambda_moduli() { return detail::log_spaced(1e-4, 1e4, 48); }

/// Scans sum/b over the (tau, lambda) grid on the rays arg lambda in
/// {0, +-nu}. The class sum depends on (tau, lambda) only through z = tau
/// lambda, so the scan runs over the deduplicated z-set; refinement doubles
/// the modulus density. phi- and tail-variant families cost O(1/|z|) per
/// point, so their z-range is floored at |z| >= 1e-5 (nine decades remain;
/// the z -> 0 plateau is approached well before the floor).
inline FamilyUniformReport verify_family_uniform(KernelFamily family, double nu, double sigma,
                                                 std::span<const double> tau_grid,
                                                 std::span<const double> lambda_moduli,
                                                 const ASeqSpec& a_seq = {},
                                                 const SchemeFunction* scheme = nullptr, int threads = 0) {
    const bool needs_scheme = family == KernelFamily::rational_basic ||
                              family == KernelFamily::rational_phi ||
                              family == KernelFamily::rational_variant;
    if (needs_scheme && scheme == nullptr)
        throw std::invalid_argument("verify_family_uniform: rational family needs a scheme");
    if (family == KernelFamily::j_reference)
        throw std::invalid_argument("verify_family_uniform: j_reference is a single reference kernel");
    const bool cheap = family == KernelFamily::exp_basic || family == KernelFamily::rational_basic;
    const double z_floor = cheap ? 0.0 : 1e-5;

    const detail_kernels::ASeq a(a_seq, sigma);
    const double b_norm = a.bound_b();

    struct Level {
        double sup = 0.0;
        double worst_abs = 0.0, worst_arg = 0.0;
        long points = 0;
    };
    auto run = [&](int refine) {
        // Deduplicated |z| set covering the product grid at `refine`-fold density.
        double zmin = 1e300, zmax = 0.0;
        for (double t : tau_grid)
            for (double lm : lambda_moduli) {
                zmin = std::min(zmin, t * lm);
                zmax = std::max(zmax, t * lm);
            }
        zmin = std::max(zmin, z_floor);
        const int base_count = static_cast<int>(tau_grid.size() + lambda_moduli.size()) * 2;
        const auto zs = detail::log_spaced(zmin, zmax, base_count * refine);
        const std::vector<double> rays = {0.0, nu, -nu};

        Level lvl;
        std::vector<double> sums(zs.size() * rays.size(), 0.0);
        detail::parallel_for(
            static_cast<std::int64_t>(zs.size() * rays.size()),
            [&](std::int64_t idx) {
                const double zabs = zs[static_cast<std::size_t>(idx) / rays.size()];
                const double phi = rays[static_cast<std::size_t>(idx) % rays.size()];
                KernelSpec spec;
                spec.family = family;
                spec.tau = 1.0;  // the sum depends on z = tau lambda only
                spec.lambda = std::polar(zabs, phi);
                spec.nu = nu;
                spec.sigma = sigma;
                spec.a_seq = a_seq;
                if (needs_scheme) spec.scheme = *scheme;
                const auto ks = ktau_sum(spec);
                sums[static_cast<std::size_t>(idx)] = ks.sum + ks.tail_bound;
            },
            threads);
        for (std::size_t i = 0; i < sums.size(); ++i) {
            if (sums[i] > lvl.sup) {
                lvl.sup = sums[i];
                lvl.worst_abs = zs[i / rays.size()];
                lvl.worst_arg = rays[i % rays.size()];
            }
        }
        lvl.points = static_cast<long>(sums.size());
        return lvl;
    };

    const Level coarse = run(1);
    const Level fine = run(2);

    FamilyUniformReport rep;
    rep.family = family;
    rep.nu = nu;
    rep.sigma = sigma;
    rep.sup_normalized_coarse = coarse.sup / b_norm;
    rep.sup_normalized = fine.sup / b_norm;
    rep.refinement_ratio = coarse.sup > 0.0 ? fine.sup / coarse.sup : 1.0;
    rep.worst_abs_z = fine.worst_abs;
    rep.worst_arg_z = fine.worst_arg;
    rep.grid_points = coarse.points + fine.points;
    rep.passes = std::isfinite(rep.sup_normalized) && rep.refinement_ratio < 1.1;
    rep.grid_spec = "z = tau*lambda dedup, rays {0,+-nu}, |z| in [" + std::to_string(z_floor) +
                    " floored, ...], x" + std::to_string(coarse.points) + "+" + std::to_string(fine.points);
    return rep;
}

// ---------------------------------------------------------------------------
// Operator-norm probing

/// Probes || I^tau(k) g ||_{l^p_{tau,w_alpha}(X_0)} / || g ||_{L^p(w_alpha; X_0(H))}
/// over a set of step processes by Monte Carlo: a necessary condition for the
/// uniform boundedness the R-boundedness theorem asserts. The data norm here
/// carries no fractional-power scaling (the convolution maps flat spaces).
inline double operator_norm_probe(const KernelSpec& spec, ConvolutionVariant variant, double p, double q,
                                  double alpha, std::span<const StepProcess> probes, int n_paths,
                                  std::uint64_t seed, int threads = 0) {
    spec.validate();
    if (!(p >= 2.0)) throw std::invalid_argument("operator_norm_probe: p >= 2");
    const auto membership = ktau_sum(spec);
    if (!membership.member && spec.family != KernelFamily::j_reference)
        throw std::invalid_argument("operator_norm_probe: kernel fails the class-sum membership check");

    double worst = 0.0;
    for (const auto& g : probes) {
        const auto kernel = materialize_kernel(spec, g.steps);
        DiagonalOperator flat;  // q-norm container; eigenvalues unused at alpha = 0
        flat.q_exponent = q;
        flat.eigenvalues.resize(static_cast<std::size_t>(g.modes_x));
        for (int k = 0; k < g.modes_x; ++k) flat.eigenvalues[static_cast<std::size_t>(k)] = k + 1.0;

        const double data_norm = weighted_lp_data_norm(flat, g, p, alpha, /*gamma_scale_alpha=*/0.0);
        if (data_norm == 0.0) {
            continue;  // zero probe contributes zero ratio
        }
        auto path_value = [&](std::uint64_t path) {
            const auto bundle = sample_bundle(flat.eigenvalues, g.steps, g.step, g.modes_h,
                                              identity_coupling(g.modes_x), seed, path);
            const auto rows = discrete_convolution(kernel, g, bundle, variant);
            std::vector<double> terms(static_cast<std::size_t>(g.steps) + 1);
            for (int n = 0; n <= g.steps; ++n) {
                double qacc = 0.0;
                for (int k = 0; k < g.modes_x; ++k) {
                    const double m =
                        std::abs(rows[static_cast<std::size_t>(n) * static_cast<std::size_t>(g.modes_x) +
                                      static_cast<std::size_t>(k)]);
                    qacc += q == 2.0 ? m * m : std::pow(m, q);
                }
                const double norm = q == 2.0 ? std::sqrt(qacc) : std::pow(qacc, 1.0 / q);
                const double t_next = (n + 1) * g.step;
                terms[static_cast<std::size_t>(n)] =
                    g.step * (alpha == 0.0 ? 1.0 : std::pow(t_next, alpha)) * std::pow(norm, p);
            }
            return detail::pairwise_sum(terms);
        };
        const auto mc = mc_estimate(path_value, n_paths, threads);
        worst = std::max(worst, std::pow(mc.mean, 1.0 / p) / data_norm);
    }
    return worst;
}

inline const char* to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::exp_basic: return "exp_basic";
        case KernelFamily::exp_phi: return "exp_phi";
        case KernelFamily::exp_variant: return "exp_variant";
        case KernelFamily::rational_basic: return "rational_basic";
        case KernelFamily::rational_phi: return "rational_phi";
        case KernelFamily::rational_variant: return "rational_variant";
        case KernelFamily::j_reference: return "j_reference";
        case KernelFamily::custom: return "custom";
    }
    return "?";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    for (auto f : {KernelFamily::exp_basic, KernelFamily::exp_phi, KernelFamily::exp_variant,
                   KernelFamily::rational_basic, KernelFamily::rational_phi,
                   KernelFamily::rational_variant, KernelFamily::j_reference, KernelFamily::custom})
        if (s == to_string(f)) return f;
    throw std::invalid_argument("unknown kernel family '" + s + "'");
}

}  // namespace dsmr
