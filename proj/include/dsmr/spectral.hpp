#pragma once

// Diagonal (spectral) model of the sectorial operator A. All functional
// calculus is per-eigenvalue, so semigroups, fractional powers and scheme
// steps are exact scalar multipliers, and operator norms are suprema over
// the spectrum.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsmr/detail/numeric.hpp"
#include "dsmr/rational.hpp"

namespace dsmr {

using ModeVector = std::vector<double>;

struct DiagonalOperator {
    std::vector<double> eigenvalues;  // strictly increasing, all > 0
    double q_exponent = 2.0;          // 2: Hilbert l^2 model; > 2: l^q sequence model

    int dim() const { return static_cast<int>(eigenvalues.size()); }

    void validate() const {
        if (eigenvalues.empty()) throw std::invalid_argument("DiagonalOperator: empty spectrum");
        if (!(q_exponent >= 2.0)) throw std::invalid_argument("DiagonalOperator: q < 2");
        double prev = 0.0;
        for (double lam : eigenvalues) {
            if (!(lam > prev) || !std::isfinite(lam))
                throw std::invalid_argument("DiagonalOperator: eigenvalues must be positive, finite, strictly increasing");
            prev = lam;
        }
    }
};

/// Eigenvalues lambda_k = (pi k / L)^2, k = 1..M.
inline DiagonalOperator make_dirichlet_laplacian(int modes, double length, double q = 2.0) {
    if (modes < 1 || !(length > 0.0))
        throw std::invalid_argument("make_dirichlet_laplacian: need modes >= 1 and length > 0");
    DiagonalOperator op;
    op.q_exponent = q;
    op.eigenvalues.reserve(static_cast<std::size_t>(modes));
    for (int k = 1; k <= modes; ++k) {
        const double w = std::numbers::pi * k / length;
        op.eigenvalues.push_back(w * w);
    }
    op.validate();
    return op;
}

inline DiagonalOperator make_explicit_operator(std::vector<double> eigenvalues, double q = 2.0) {
    DiagonalOperator op{std::move(eigenvalues), q};
    op.validate();
    return op;
}

// ---------------------------------------------------------------------------
// Spectral calculus

/// (f(A)x)_k = f(lambda_k) x_k.
template <typename F>
ModeVector apply_spectral(const DiagonalOperator& op, F&& f, std::span<const double> x) {
    if (static_cast<int>(x.size()) != op.dim())
        throw std::invalid_argument("apply_spectral: dimension mismatch");
    ModeVector out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double v = f(op.eigenvalues[k]);
        if (!std::isfinite(v)) throw std::domain_error("apply_spectral: f undefined at an eigenvalue");
        out[k] = v * x[k];
    }
    return out;
}

inline ModeVector semigroup_apply(const DiagonalOperator& op, double t, std::span<const double> x) {
    if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: t >= 0");
    return apply_spectral(op, [t](double lam) { return std::exp(-t * lam); }, x);
}

inline ModeVector frac_power_apply(const DiagonalOperator& op, double alpha, std::span<const double> x) {
    if (alpha < -1.0 || alpha > 1.0) throw std::invalid_argument("frac_power_apply: alpha in [-1,1]");
    return apply_spectral(op, [alpha](double lam) { return std::pow(lam, alpha); }, x);
}

inline ModeVector scheme_step_apply(const DiagonalOperator& op, const SchemeFunction& scheme, double tau,
                                    std::span<const double> x) {
    if (!(tau > 0.0)) throw std::invalid_argument("scheme_step_apply: tau > 0");
    return apply_spectral(op, [&](double lam) { return eval_real(scheme, tau * lam); }, x);
}

/// Per-mode step multipliers r(tau lambda_k).
inline std::vector<double> scheme_multipliers(const DiagonalOperator& op, const SchemeFunction& scheme,
                                              double tau) {
    std::vector<double> m(static_cast<std::size_t>(op.dim()));
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = eval_real(scheme, tau * op.eigenvalues[k]);
    return m;
}

// ---------------------------------------------------------------------------
// Norms

/// || A^alpha x || in the X_0 model norm: l^2 for q = 2, l^q otherwise.
inline double space_norm(const DiagonalOperator& op, std::span<const double> x, double alpha) {
    if (static_cast<int>(x.size()) != op.dim())
        throw std::invalid_argument("space_norm: dimension mismatch");
    const double q = op.q_exponent;
    std::vector<double> terms(x.size());
    if (q == 2.0) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double w = alpha == 0.0 ? 1.0 : std::pow(op.eigenvalues[k], alpha);
            terms[k] = w * w * x[k] * x[k];
        }
        return std::sqrt(detail::pairwise_sum(terms));
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double w = alpha == 0.0 ? 1.0 : std::pow(op.eigenvalues[k], alpha);
        terms[k] = std::pow(std::abs(w * x[k]), q);
    }
    return std::pow(detail::pairwise_sum(terms), 1.0 / q);
}

struct QuadratureSpec {
    int points_per_decade = 40;
    double t_lo_factor = 1e-12;  // t_min = t_lo_factor / lambda_max
    double t_hi_factor = 1e3;    // t_max = t_hi_factor / lambda_min
};

/// Log-time quadrature table for the real-interpolation (trace) norm
///   ||x||_{D_A(alpha,p)} = ||x|| + ( int_0^inf (t^{1-alpha} ||A e^{-tA} x||)^p dt/t )^{1/p}.
/// Tabulating lambda e^{-t lambda} per node makes repeated evaluations cheap
/// (the maximal-estimate studies call this once per trajectory entry).
class TraceNormTable {
  public:
    TraceNormTable(const DiagonalOperator& op, double alpha, double p, const QuadratureSpec& quad = {})
        : op_(&op), alpha_(alpha), p_(p) {
        if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("trace_norm: alpha in (0,1)");
        if (!(p >= 2.0)) throw std::invalid_argument("trace_norm: p >= 2");
        const double lam_min = op.eigenvalues.front(), lam_max = op.eigenvalues.back();
        const double t_lo = quad.t_lo_factor / lam_max, t_hi = quad.t_hi_factor / lam_min;
        const int decades = static_cast<int>(std::ceil(std::log10(t_hi / t_lo)));
        const int nodes = std::max(16, decades * quad.points_per_decade) + 1;
        nodes_ = detail::log_spaced(t_lo, t_hi, nodes);
        du_ = std::log(t_hi / t_lo) / (nodes - 1);
        weights_.resize(nodes_.size() * static_cast<std::size_t>(op.dim()));
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            for (int k = 0; k < op.dim(); ++k) {
                const double lam = op.eigenvalues[static_cast<std::size_t>(k)];
                weights_[i * static_cast<std::size_t>(op.dim()) + static_cast<std::size_t>(k)] =
                    lam * std::exp(-nodes_[i] * lam);
            }
    }

    /// Seminorm part only (the integral term).
    double seminorm(std::span<const double> x, bool* converged = nullptr) const {
        const int m = op_->dim();
        if (static_cast<int>(x.size()) != m) throw std::invalid_argument("trace_norm: dimension mismatch");
        const double q = op_->q_exponent;
        std::vector<double> f(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const double* w = &weights_[i * static_cast<std::size_t>(m)];
            double norm;
            if (q == 2.0) {
                double acc = 0.0;
                for (int k = 0; k < m; ++k) acc += w[k] * w[k] * x[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
                norm = std::sqrt(acc);
            } else {
                double acc = 0.0;
                for (int k = 0; k < m; ++k) acc += std::pow(std::abs(w[k] * x[static_cast<std::size_t>(k)]), q);
                norm = std::pow(acc, 1.0 / q);
            }
            f[i] = std::pow(std::pow(nodes_[i], 1.0 - alpha_) * norm, p_);
        }
        // Trapezoid in u = log t; the stride-2 subsum provides the coarser
        // refinement level for the convergence check.
        auto trap = [&](std::size_t stride) {
            double acc = 0.0;
            for (std::size_t i = 0; i + stride < f.size(); i += stride)
                acc += 0.5 * (f[i] + f[i + stride]) * du_ * static_cast<double>(stride);
            return acc;
        };
        const double full = trap(1), half = trap(2);
        if (converged != nullptr)
            *converged = !(std::abs(full - half) > 1e-6 * (std::abs(full) + 1e-300));
        return std::pow(full, 1.0 / p_);
    }

    double alpha() const { return alpha_; }
    double exponent_p() const { return p_; }

  private:
    const DiagonalOperator* op_;
    double alpha_, p_;
    std::vector<double> nodes_;
    std::vector<double> weights_;  // [node][mode] = lambda e^{-t lambda}
    double du_ = 0.0;
};

/// || x ||_{D_A(alpha,p)} with a quadrature convergence check across two
/// refinement levels (throws on non-convergence).
inline double trace_norm(const DiagonalOperator& op, std::span<const double> x, double alpha, double p,
                         const QuadratureSpec& quad = {}) {
    const TraceNormTable table(op, alpha, p, quad);
    bool seminorm_zero = true;
    for (double v : x) seminorm_zero = seminorm_zero && v == 0.0;
    if (seminorm_zero) return 0.0;
    bool converged = false;
    const double semi = table.seminorm(x, &converged);
    if (!converged) throw std::runtime_error("trace_norm: quadrature did not converge across refinement levels");
    return space_norm(op, x, 0.0) + semi;
}

}  // namespace dsmr
