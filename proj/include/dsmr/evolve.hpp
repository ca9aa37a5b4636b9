#pragma once

// The scheme recursion Y_{n+1} = R_tau (Y_n + g_n dW_n), its convolution
// form, generic discrete stochastic convolutions, and the exact mild solution
// coupled to the same path.

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsmr/noise.hpp"
#include "dsmr/spectral.hpp"

namespace dsmr {

enum class TrajectoryLabel { discrete, mild };

struct Trajectory {
    int steps = 0;  // N; values hold N+1 rows, row 0 is the zero initial value
    int modes = 0;
    double step = 0.0;
    TrajectoryLabel label = TrajectoryLabel::discrete;
    std::vector<double> values;  // [n][k], n = 0..N

    double at(int n, int k) const {
        return values[static_cast<std::size_t>(n) * static_cast<std::size_t>(modes) + static_cast<std::size_t>(k)];
    }
    std::span<const double> row(int n) const {
        return {values.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(modes),
                static_cast<std::size_t>(modes)};
    }
};

namespace detail_evolve {

inline void check_dims(const DiagonalOperator& op, const StepProcess& g, const PathBundle& bundle,
                       double tau) {
    if (g.modes_x != op.dim() || bundle.modes_x != op.dim() || bundle.modes_h != g.modes_h)
        throw std::invalid_argument("evolve: dimension mismatch between operator, process and bundle");
    if (bundle.steps < g.steps) throw std::invalid_argument("evolve: bundle shorter than the process");
    if (!(tau > 0.0) || std::abs(bundle.step - tau) > 1e-12 * tau)
        throw std::invalid_argument("evolve: bundle was generated for a different step size");
}

/// (g_n dW_n)_k for one step.
inline void increments(const StepProcess& g, const PathBundle& bundle, int n, std::span<double> out) {
    for (int k = 0; k < g.modes_x; ++k) {
        double acc = 0.0;
        for (int m = 0; m < g.modes_h; ++m) {
            const double gv = g.at(n, k, m);
            if (gv != 0.0) acc += gv * bundle.dW(n, m);
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
}

}  // namespace detail_evolve

/// Geometric kernel k_i = multiplier^i: the scheme recursion in convolution
/// clothing. run_discrete delegates here, so the "power kernel reproduces the
/// recursion" identity holds by sharing the per-mode code path.
struct PowerKernel {
    std::vector<double> multipliers;  // r(tau lambda_k) per mode
};

inline Trajectory discrete_convolution(const DiagonalOperator& op, const PowerKernel& kernel,
                                       const StepProcess& g, const PathBundle& bundle, double tau) {
    detail_evolve::check_dims(op, g, bundle, tau);
    if (static_cast<int>(kernel.multipliers.size()) != op.dim())
        throw std::invalid_argument("discrete_convolution: kernel/operator mismatch");
    const int m = op.dim();
    const int n_steps = g.steps;
    Trajectory traj;
    traj.steps = n_steps;
    traj.modes = m;
    traj.step = tau;
    traj.label = TrajectoryLabel::discrete;
    traj.values.assign(static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(m), 0.0);
    std::vector<double> inc(static_cast<std::size_t>(m));
    for (int n = 0; n < n_steps; ++n) {
        detail_evolve::increments(g, bundle, n, inc);
        const double* prev = traj.values.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
        double* next = traj.values.data() + static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(m);
        for (int k = 0; k < m; ++k)
            next[k] = kernel.multipliers[static_cast<std::size_t>(k)] * (prev[k] + inc[static_cast<std::size_t>(k)]);
    }
    return traj;
}

inline Trajectory run_discrete(const DiagonalOperator& op, const SchemeFunction& scheme,
                               const StepProcess& g, const PathBundle& bundle, double tau) {
    return discrete_convolution(op, PowerKernel{scheme_multipliers(op, scheme, tau)}, g, bundle, tau);
}

/// Exact mild solution at grid points, per mode
///   y_{n+1,k} = e^{-lambda_k tau} y_{n,k} + g_{n,k,kappa(k)} E_{n,k},
/// which telescopes the semigroup and is exact in distribution, pathwise
/// coupled to run_discrete through the shared bundle. Diagonal coupling only.
inline Trajectory run_mild_exact(const DiagonalOperator& op, const StepProcess& g, const PathBundle& bundle,
                                 double tau) {
    detail_evolve::check_dims(op, g, bundle, tau);
    for (int n = 0; n < g.steps; ++n)
        for (int k = 0; k < g.modes_x; ++k)
            for (int m = 0; m < g.modes_h; ++m)
                if (m != static_cast<int>(bundle.coupling[static_cast<std::size_t>(k)]) && g.at(n, k, m) != 0.0)
                    throw std::invalid_argument(
                        "run_mild_exact: non-diagonal coupling is not supported (exact integrals are "
                        "sampled against a single driving mode per state mode)");

    const int m = op.dim();
    Trajectory traj;
    traj.steps = g.steps;
    traj.modes = m;
    traj.step = tau;
    traj.label = TrajectoryLabel::mild;
    traj.values.assign(static_cast<std::size_t>(g.steps + 1) * static_cast<std::size_t>(m), 0.0);
    std::vector<double> decay(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) decay[static_cast<std::size_t>(k)] = std::exp(-op.eigenvalues[static_cast<std::size_t>(k)] * tau);
    for (int n = 0; n < g.steps; ++n) {
        const double* prev = traj.values.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
        double* next = traj.values.data() + static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(m);
        for (int k = 0; k < m; ++k) {
            const int drive = static_cast<int>(bundle.coupling[static_cast<std::size_t>(k)]);
            next[k] = decay[static_cast<std::size_t>(k)] * prev[k] + g.at(n, k, drive) * bundle.E(n, k);
        }
    }
    return traj;
}

enum class ConvolutionVariant { causal, anticausal };

/// Generic discrete stochastic convolution with an explicit kernel sequence,
/// shared across all modes (the kernel studies are scalar in lambda):
///   causal:     (I k g)_n = sum_{j=0}^{n-1} k_{n-j} dI_j,   n >= 1
///   anticausal: (I~ k g)_n = sum_{j>=n}  k_{j-n} dI_j,      with k_0 := 0
/// Returns the complex sequence [n][k] (kernels may live on sector rays).
inline std::vector<std::complex<double>> discrete_convolution(
    const std::vector<std::complex<double>>& kernel,  // kernel[i] = k_{i+1}
    const StepProcess& g, const PathBundle& bundle, ConvolutionVariant variant) {
    const int n_steps = g.steps;
    const int m = g.modes_x;
    std::vector<double> inc(static_cast<std::size_t>(n_steps) * static_cast<std::size_t>(m));
    for (int n = 0; n < n_steps; ++n)
        detail_evolve::increments(g, bundle, n,
                                  {inc.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(m),
                                   static_cast<std::size_t>(m)});
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(m),
                                          0.0);
    auto kern = [&](int i) {  // k_i with k_0 = 0 and zero past the truncation
        return (i >= 1 && i <= static_cast<int>(kernel.size())) ? kernel[static_cast<std::size_t>(i - 1)]
                                                                : std::complex<double>(0.0);
    };
    for (int n = 1; n <= n_steps; ++n) {
        auto* row = out.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
        if (variant == ConvolutionVariant::causal) {
            for (int j = 0; j < n; ++j) {
                const std::complex<double> kv = kern(n - j);
                if (kv == 0.0) continue;
                const double* d = inc.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(m);
                for (int k = 0; k < m; ++k) row[k] += kv * d[k];
            }
        } else {
            for (int j = n; j < n_steps; ++j) {
                const std::complex<double> kv = kern(j - n);
                if (kv == 0.0) continue;
                const double* d = inc.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(m);
                for (int k = 0; k < m; ++k) row[k] += kv * d[k];
            }
        }
    }
    return out;
}

}  // namespace dsmr
