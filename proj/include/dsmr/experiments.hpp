#pragma once

// Config-driven studies: strong-convergence rates, regularity-constant
// uniformity across step sizes, scheme equivalence, maximal estimates, and
// weighted extrapolation, each emitting a row table and pass/fail verdicts.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsmr/evolve.hpp"
#include "dsmr/kernels.hpp"
#include "dsmr/noise.hpp"
#include "dsmr/norms.hpp"
#include "dsmr/rational.hpp"
#include "dsmr/rng.hpp"
#include "dsmr/spectral.hpp"

namespace dsmr {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Configuration

struct OperatorSpec {
    std::string type = "dirichlet_laplacian";  // or "explicit"
    int modes = 64;
    double length = std::numbers::pi;
    double q = 2.0;
    std::vector<double> eigenvalues;  // type == "explicit"
};

inline DiagonalOperator make_operator(const OperatorSpec& spec) {
    if (spec.type == "dirichlet_laplacian") return make_dirichlet_laplacian(spec.modes, spec.length, spec.q);
    if (spec.type == "explicit") return make_explicit_operator(spec.eigenvalues, spec.q);
    throw std::invalid_argument("operator spec: unknown type '" + spec.type + "'");
}

struct ProbeSpec {
    TestProcessKind kind = TestProcessKind::mode_decay;
    double decay = 1.0;
    double scale = 1.0;
};

/// Versioned probe family: constants are only comparable across runs and
/// schemes if the family is fixed. v1 adds the scale-critical decay s = 1.5,
/// whose band contribution per log-lambda octave is flat.
inline std::vector<ProbeSpec> default_probe_family() {
    return {{TestProcessKind::constant, 0.0, 1.0},     {TestProcessKind::mode_decay, 1.0, 1.0},
            {TestProcessKind::mode_decay, 1.5, 1.0},   {TestProcessKind::mode_decay, 2.0, 1.0},
            {TestProcessKind::random_adapted, 1.0, 1.0}, {TestProcessKind::alternating, 1.0, 1.0}};
}

struct ConvergenceCase {
    double alpha = 0.0;
    double beta = 0.0;
    double g_decay = 1.0;
    std::vector<double> tau_list;
};

struct StudyConfig {
    int schema_version = kConfigSchemaVersion;
    std::string study;
    OperatorSpec op;
    std::vector<std::string> schemes{"implicit_euler"};
    double p = 2.0;
    double alpha = 0.0;
    std::vector<double> alpha_list;
    std::vector<double> tau_list;
    double total_time = 1.0;
    int n_paths = 512;
    std::uint64_t seed = 12345;
    int threads = 0;
    int fine_factor = 8;  // convergence: quadrature nodes per step, mild grid refinement
    std::vector<ConvergenceCase> convergence_cases;
    std::vector<ProbeSpec> probes = default_probe_family();
    int trace_points_per_decade = 12;  // maximal-estimate quadrature density
    // kernel audit
    std::string kernel_family = "exp_basic";
    double sigma = 0.25;
    std::optional<double> nu;
    // scheme audit
    std::string audit_scheme = "implicit_euler";
    std::string dump_paths_dir;
};

// ---------------------------------------------------------------------------
// Reports

struct Verdict {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct StudyReport {
    std::string study;
    nlohmann::json config_echo;
    std::vector<std::string> row_header;
    std::vector<std::vector<double>> rows;
    std::vector<Verdict> verdicts;
    nlohmann::json extra;  // study-specific structured results
    std::string rng_algorithm = kRngAlgorithmId;
    std::string code_version = kCodeVersion;
    double wall_time_s = 0.0;

    bool pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return !verdicts.empty();
    }
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string rows_csv(const StudyReport& rep) {
    std::string out;
    for (std::size_t i = 0; i < rep.row_header.size(); ++i) {
        out += rep.row_header[i];
        out += (i + 1 < rep.row_header.size()) ? ',' : '\n';
    }
    for (const auto& row : rep.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += format_double(row[i]);
            out += (i + 1 < row.size()) ? ',' : '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization

inline void to_json(nlohmann::json& j, const OperatorSpec& s) {
    j = {{"type", s.type}, {"modes", s.modes}, {"length", s.length}, {"q", s.q}};
    if (!s.eigenvalues.empty()) j["eigenvalues"] = s.eigenvalues;
}
inline void from_json(const nlohmann::json& j, OperatorSpec& s) {
    s.type = j.value("type", s.type);
    s.modes = j.value("modes", s.modes);
    s.length = j.value("length", s.length);
    s.q = j.value("q", s.q);
    s.eigenvalues = j.value("eigenvalues", s.eigenvalues);
}
inline void to_json(nlohmann::json& j, const ProbeSpec& s) {
    j = {{"kind", to_string(s.kind)}, {"decay", s.decay}, {"scale", s.scale}};
}
inline void from_json(const nlohmann::json& j, ProbeSpec& s) {
    const std::string kind = j.value("kind", "mode_decay");
    if (kind == "constant") s.kind = TestProcessKind::constant;
    else if (kind == "mode_decay") s.kind = TestProcessKind::mode_decay;
    else if (kind == "random_adapted") s.kind = TestProcessKind::random_adapted;
    else if (kind == "alternating") s.kind = TestProcessKind::alternating;
    else throw std::invalid_argument("probe spec: unknown kind '" + kind + "'");
    s.decay = j.value("decay", s.decay);
    s.scale = j.value("scale", s.scale);
}
inline void to_json(nlohmann::json& j, const ConvergenceCase& c) {
    j = {{"alpha", c.alpha}, {"beta", c.beta}, {"g_decay", c.g_decay}, {"tau_list", c.tau_list}};
}
inline void from_json(const nlohmann::json& j, ConvergenceCase& c) {
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.g_decay = j.value("g_decay", c.g_decay);
    c.tau_list = j.value("tau_list", c.tau_list);
}
inline void to_json(nlohmann::json& j, const StudyConfig& c) {
    j = {{"schema_version", c.schema_version},
         {"study", c.study},
         {"operator", c.op},
         {"schemes", c.schemes},
         {"p", c.p},
         {"alpha", c.alpha},
         {"alpha_list", c.alpha_list},
         {"tau_list", c.tau_list},
         {"T", c.total_time},
         {"n_paths", c.n_paths},
         {"seed", c.seed},
         {"threads", c.threads},
         {"fine_factor", c.fine_factor},
         {"convergence_cases", c.convergence_cases},
         {"probes", c.probes},
         {"trace_points_per_decade", c.trace_points_per_decade},
         {"kernel_family", c.kernel_family},
         {"sigma", c.sigma},
         {"audit_scheme", c.audit_scheme}};
    if (c.nu) j["nu"] = *c.nu;
}
inline void from_json(const nlohmann::json& j, StudyConfig& c) {
    c.schema_version = j.value("schema_version", kConfigSchemaVersion);
    if (c.schema_version != kConfigSchemaVersion)
        throw std::invalid_argument("config: unsupported schema_version");
    c.study = j.value("study", c.study);
    if (j.contains("operator")) j.at("operator").get_to(c.op);
    c.schemes = j.value("schemes", c.schemes);
    c.p = j.value("p", c.p);
    c.alpha = j.value("alpha", c.alpha);
    c.alpha_list = j.value("alpha_list", c.alpha_list);
    c.tau_list = j.value("tau_list", c.tau_list);
    c.total_time = j.value("T", c.total_time);
    c.n_paths = j.value("n_paths", c.n_paths);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.fine_factor = j.value("fine_factor", c.fine_factor);
    c.convergence_cases = j.value("convergence_cases", c.convergence_cases);
    if (j.contains("probes")) c.probes = j.at("probes").get<std::vector<ProbeSpec>>();
    c.trace_points_per_decade = j.value("trace_points_per_decade", c.trace_points_per_decade);
    c.kernel_family = j.value("kernel_family", c.kernel_family);
    c.sigma = j.value("sigma", c.sigma);
    if (j.contains("nu")) c.nu = j.at("nu").get<double>();
    c.audit_scheme = j.value("audit_scheme", c.audit_scheme);
}

inline void to_json(nlohmann::json& j, const Verdict& v) {
    j = {{"name", v.name}, {"pass", v.pass}, {"value", v.value}, {"threshold", v.threshold},
         {"detail", v.detail}};
}
inline void to_json(nlohmann::json& j, const StudyReport& r) {
    j = {{"schema_version", kConfigSchemaVersion},
         {"study", r.study},
         {"config", r.config_echo},
         {"row_header", r.row_header},
         {"rows", r.rows},
         {"verdicts", r.verdicts},
         {"extra", r.extra},
         {"rng_algorithm", r.rng_algorithm},
         {"code_version", r.code_version},
         {"wall_time_s", r.wall_time_s},
         {"pass", r.pass()}};
}

// ---------------------------------------------------------------------------
// Path dumping (--dump-paths)

inline void dump_bundle(const std::string& dir, const PathBundle& b, const std::string& label) {
    auto write_f64 = [&](const std::string& path, std::span<const double> data) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("dump_bundle: cannot open " + path);
        // little-endian float64; this build targets little-endian hosts
        f.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
    };
    write_f64(dir + "/" + label + ".dW.f64", b.dw);
    write_f64(dir + "/" + label + ".E.f64", b.e);
    nlohmann::json side = {{"label", label},
                           {"steps", b.steps},
                           {"modes_h", b.modes_h},
                           {"modes_x", b.modes_x},
                           {"step", b.step},
                           {"seed", b.seed},
                           {"path_index", b.path_index},
                           {"layout", "row-major [step][mode], float64 little-endian"},
                           {"rng_algorithm", kRngAlgorithmId}};
    std::ofstream sf(dir + "/" + label + ".json");
    sf << side.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Shared study machinery

namespace detail_experiments {

struct ProbeContext {
    const DiagonalOperator* op;
    const SchemeFunction* scheme;
    ProbeSpec probe;
    double tau;
    int n_steps;
    double p;
    double alpha;
    std::uint64_t seed;
    int n_paths;
    int threads;
};

inline StepProcess probe_process(const ProbeContext& ctx, const PathBundle* bundle) {
    TestProcessParams params;
    params.scale = ctx.probe.scale;
    params.decay = ctx.probe.decay;
    return make_test_process(ctx.probe.kind, *ctx.op, ctx.n_steps, ctx.tau, params, bundle);
}

inline bool probe_is_deterministic(const ProbeSpec& p) { return p.kind != TestProcessKind::random_adapted; }

/// (E ||AY||_{l^p_{tau,w_alpha}}^p / E ||g||^p)^{1/p} for one probe, by MC
/// (or the Ito-isometry closed form when p = 2, q = 2 and g deterministic).
inline double probed_dsmr_ratio(const ProbeContext& ctx) {
    const auto& op = *ctx.op;
    const bool closed_form = ctx.p == 2.0 && op.q_exponent == 2.0 && probe_is_deterministic(ctx.probe);
    if (closed_form) {
        const auto g = probe_process(ctx, nullptr);
        return dsmr_constant_p2_closed_form(op, *ctx.scheme, g, ctx.tau, ctx.n_steps, ctx.alpha);
    }
    const auto coupling = identity_coupling(op.dim());
    auto numerator = [&](std::uint64_t path) {
        const auto bundle = sample_bundle(op.eigenvalues, ctx.n_steps, ctx.tau, op.dim(), coupling,
                                          ctx.seed, path);
        const auto g = probe_process(ctx, &bundle);
        const auto traj = run_discrete(op, *ctx.scheme, g, bundle, ctx.tau);
        return std::pow(dsmr_functional(op, traj, ctx.p, ctx.alpha), ctx.p);
    };
    const auto num = mc_estimate(numerator, ctx.n_paths, ctx.threads);
    double den_p;
    if (probe_is_deterministic(ctx.probe)) {
        const auto g = probe_process(ctx, nullptr);
        den_p = std::pow(weighted_lp_data_norm(op, g, ctx.p, ctx.alpha), ctx.p);
    } else {
        auto denominator = [&](std::uint64_t path) {
            const auto bundle = sample_bundle(op.eigenvalues, ctx.n_steps, ctx.tau, op.dim(), coupling,
                                              ctx.seed, path);
            const auto g = probe_process(ctx, &bundle);
            return std::pow(weighted_lp_data_norm(op, g, ctx.p, ctx.alpha), ctx.p);
        };
        den_p = mc_estimate(denominator, ctx.n_paths, ctx.threads).mean;
    }
    return std::pow(num.mean / den_p, 1.0 / ctx.p);
}

inline double max_over_min(std::span<const double> v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi == 0.0) return 1.0;  // identically zero series is perfectly uniform
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

inline int checked_steps(double T, double tau) {
    const double n = T / tau;
    const int ni = static_cast<int>(std::lround(n));
    if (ni < 1 || std::abs(n - ni) > 1e-9)
        throw std::invalid_argument("study: tau must divide T (admissible step)");
    return ni;
}

}  // namespace detail_experiments

// ---------------------------------------------------------------------------
// Studies

/// Strong convergence against the exact pathwise-coupled mild solution
/// (per-interval quadrature at fine-grid points), slope fitted per case and
/// compared with 1/2 + alpha - beta.
inline StudyReport run_study_convergence(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto op = make_operator(cfg.op);
    const auto scheme = builtin_scheme(cfg.schemes.at(0));
    if (cfg.convergence_cases.empty())
        throw std::invalid_argument("convergence: at least one (alpha, beta) case required");
    if (cfg.fine_factor < 2) throw std::invalid_argument("convergence: fine_factor >= 2");

    StudyReport rep;
    rep.study = "convergence";
    rep.config_echo = cfg;
    rep.row_header = {"case", "alpha", "beta", "tau", "error", "error_stderr", "n_paths"};

    const auto coupling = identity_coupling(op.dim());
    int case_idx = 0;
    for (const auto& cs : cfg.convergence_cases) {
        if (!(0.0 <= cs.alpha && cs.alpha <= cs.beta && cs.beta <= 1.0 && cs.beta - cs.alpha < 0.5))
            throw std::invalid_argument("convergence: need 0 <= alpha <= beta <= 1, beta - alpha < 1/2");
        if (cs.tau_list.size() < 2) throw std::invalid_argument("convergence: tau_list needs >= 2 levels");

        TestProcessParams params;
        params.decay = cs.g_decay;
        params.lambda_power = cs.alpha;
        std::vector<double> lx, ly, err_sigma_log;
        for (double tau : cs.tau_list) {
            const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
            const int fine = cfg.fine_factor;
            const int n_fine = n_steps * fine;
            const double tau_f = tau / fine;

            const auto g_fine = make_test_process(TestProcessKind::mode_decay, op, n_fine, tau_f, params);
            const auto g_coarse = make_test_process(TestProcessKind::mode_decay, op, n_steps, tau, params);
            {
                double norm = 0.0;
                for (double v : g_coarse.values) norm += std::abs(v);
                if (norm == 0.0) throw std::invalid_argument("convergence: degenerate zero integrand");
            }

            auto path_error_p = [&](std::uint64_t path) {
                const auto bundle_f =
                    sample_bundle(op.eigenvalues, n_fine, tau_f, op.dim(), coupling, cfg.seed, path);
                const auto mild = run_mild_exact(op, g_fine, bundle_f, tau_f);
                // Aggregate fine increments into the coarse-grid bundle.
                PathBundle bundle_c;
                bundle_c.steps = n_steps;
                bundle_c.modes_h = op.dim();
                bundle_c.modes_x = op.dim();
                bundle_c.step = tau;
                bundle_c.coupling = coupling;
                bundle_c.dw.assign(static_cast<std::size_t>(n_steps) * static_cast<std::size_t>(op.dim()), 0.0);
                bundle_c.e.assign(bundle_c.dw.size(), 0.0);
                for (int n = 0; n < n_steps; ++n)
                    for (int i = 0; i < fine; ++i)
                        for (int k = 0; k < op.dim(); ++k)
                            bundle_c.dw[static_cast<std::size_t>(n) * static_cast<std::size_t>(op.dim()) +
                                        static_cast<std::size_t>(k)] += bundle_f.dW(n * fine + i, k);
                const auto discrete = run_discrete(op, scheme, g_coarse, bundle_c, tau);

                // sum_n sum_{i=1..fine} tau_f || A^beta (y(t_n + i tau_f) - Y_n) ||^p
                std::vector<double> diff(static_cast<std::size_t>(op.dim()));
                std::vector<double> terms(static_cast<std::size_t>(n_fine));
                for (int n = 0; n < n_steps; ++n)
                    for (int i = 1; i <= fine; ++i) {
                        const auto yrow = mild.row(n * fine + i);
                        const auto Yrow = discrete.row(n);
                        for (int k = 0; k < op.dim(); ++k)
                            diff[static_cast<std::size_t>(k)] = yrow[static_cast<std::size_t>(k)] -
                                                                Yrow[static_cast<std::size_t>(k)];
                        terms[static_cast<std::size_t>(n * fine + i - 1)] =
                            tau_f * std::pow(space_norm(op, diff, cs.beta), cfg.p);
                    }
                return detail::pairwise_sum(terms);
            };
            const auto mc = mc_estimate(path_error_p, cfg.n_paths, cfg.threads);
            const double err = std::pow(mc.mean, 1.0 / cfg.p);
            rep.rows.push_back({static_cast<double>(case_idx), cs.alpha, cs.beta, tau, err,
                                mc.stderr_of_mean, static_cast<double>(cfg.n_paths)});
            lx.push_back(std::log2(tau));
            ly.push_back(std::log2(err));
            // d log2(err) = (1/p) d(mean)/mean / ln 2
            err_sigma_log.push_back(mc.stderr_of_mean / (cfg.p * mc.mean * std::numbers::ln2));
        }
        const auto fit = detail::fit_line(lx, ly);
        // Slope CI from per-point noise through the OLS weights.
        double sx = 0.0, sxx = 0.0;
        for (double x : lx) sx += x;
        const double xbar = sx / static_cast<double>(lx.size());
        for (double x : lx) sxx += (x - xbar) * (x - xbar);
        double var_slope = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            const double c = (lx[i] - xbar) / sxx;
            var_slope += c * c * err_sigma_log[i] * err_sigma_log[i];
        }
        const double ci95 = 1.959963984540054 * std::sqrt(var_slope);
        const double target = 0.5 + cs.alpha - cs.beta;

        Verdict v;
        v.name = "slope(alpha=" + format_double(cs.alpha) + ",beta=" + format_double(cs.beta) + ")";
        v.value = fit.slope;
        v.threshold = 0.07;
        if (ci95 > 0.07) {
            v.pass = false;
            v.detail = "inconclusive: slope CI95 " + format_double(ci95) +
                       " wider than tolerance; raise n_paths";
        } else {
            v.pass = std::abs(fit.slope - target) <= 0.07;
            v.detail = "target " + format_double(target) + ", ci95 " + format_double(ci95);
        }
        rep.verdicts.push_back(v);
        rep.extra["slopes"].push_back({{"alpha", cs.alpha},
                                       {"beta", cs.beta},
                                       {"slope", fit.slope},
                                       {"target", target},
                                       {"ci95", ci95}});
        ++case_idx;
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

/// Probed regularity-constant uniformity across tau: the ratio sup over the
/// probe family of ||AY|| / ||g||, per scheme, must not drift across the
/// dyadic tau levels.
inline StudyReport run_study_dsmr_uniformity(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto op = make_operator(cfg.op);
    if (cfg.tau_list.size() < 2)
        throw std::invalid_argument("dsmr_uniformity: tau_list needs >= 2 dyadic levels");

    StudyReport rep;
    rep.study = "dsmr_uniformity";
    rep.config_echo = cfg;
    rep.row_header = {"scheme", "tau", "sup_ratio"};
    for (const auto& pr : cfg.probes)
        rep.row_header.push_back(std::string("ratio_") + to_string(pr.kind) + "_" + format_double(pr.decay));

    if (!cfg.dump_paths_dir.empty()) {
        const int n0 = detail_experiments::checked_steps(cfg.total_time, cfg.tau_list.front());
        for (std::uint64_t path = 0; path < 4; ++path)
            dump_bundle(cfg.dump_paths_dir,
                        sample_bundle(op.eigenvalues, n0, cfg.tau_list.front(), op.dim(),
                                      identity_coupling(op.dim()), cfg.seed, path),
                        "uniformity_tau0_path" + std::to_string(path));
    }

    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
        const auto scheme = builtin_scheme(cfg.schemes[si]);
        if (!scheme.dsmr_admissible())
            throw std::invalid_argument("dsmr_uniformity: scheme '" + scheme.name +
                                        "' has r(infinity) != 0 and is excluded");
        std::vector<double> sups;
        for (double tau : cfg.tau_list) {
            const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
            std::vector<double> row = {static_cast<double>(si), tau, 0.0};
            double sup = 0.0;
            for (const auto& probe : cfg.probes) {
                detail_experiments::ProbeContext ctx{&op,     &scheme,   probe,      tau,
                                                     n_steps, cfg.p,     cfg.alpha,  cfg.seed,
                                                     cfg.n_paths, cfg.threads};
                const double ratio = detail_experiments::probed_dsmr_ratio(ctx);
                row.push_back(ratio);
                sup = std::max(sup, ratio);
            }
            row[2] = sup;
            sups.push_back(sup);
            rep.rows.push_back(row);
        }
        Verdict v;
        v.name = "uniformity_" + scheme.name;
        v.value = detail_experiments::max_over_min(sups);
        v.threshold = 2.0;
        v.pass = v.value <= 2.0;
        v.detail = "max/min of probed sup-ratios over tau";
        rep.verdicts.push_back(v);
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

/// Paired-path difference between the semigroup-exact scheme and each
/// rational scheme: || A (Y^{EE} - Y^{R}) ||_{l^p_tau} / data norm.
inline StudyReport run_study_scheme_equivalence(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto op = make_operator(cfg.op);
    if (cfg.schemes.size() < 2 || cfg.schemes.front() != "exponential_euler")
        throw std::invalid_argument("scheme_equivalence: schemes must start with exponential_euler");

    StudyReport rep;
    rep.study = "scheme_equivalence";
    rep.config_echo = cfg;
    rep.row_header = {"scheme", "tau", "sup_diff_ratio"};
    const auto ee = builtin_scheme(BuiltinScheme::exponential_euler);
    const auto coupling = identity_coupling(op.dim());

    for (std::size_t si = 1; si < cfg.schemes.size(); ++si) {
        const auto scheme = builtin_scheme(cfg.schemes[si]);
        std::vector<double> sups;
        for (double tau : cfg.tau_list) {
            const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
            double sup = 0.0;
            for (const auto& probe : cfg.probes) {
                detail_experiments::ProbeContext ctx{&op,     &scheme, probe,     tau,
                                                     n_steps, cfg.p,   0.0,       cfg.seed,
                                                     cfg.n_paths, cfg.threads};
                auto numerator = [&](std::uint64_t path) {
                    const auto bundle = sample_bundle(op.eigenvalues, n_steps, tau, op.dim(), coupling,
                                                      cfg.seed, path);
                    const auto g = detail_experiments::probe_process(ctx, &bundle);
                    auto ytr = run_discrete(op, ee, g, bundle, tau);
                    const auto yr = run_discrete(op, scheme, g, bundle, tau);
                    for (std::size_t i = 0; i < ytr.values.size(); ++i) ytr.values[i] -= yr.values[i];
                    return std::pow(dsmr_functional(op, ytr, cfg.p, 0.0), cfg.p);
                };
                const auto num = mc_estimate(numerator, cfg.n_paths, cfg.threads);
                double den_p;
                if (detail_experiments::probe_is_deterministic(probe)) {
                    den_p = std::pow(weighted_lp_data_norm(op, detail_experiments::probe_process(ctx, nullptr),
                                                           cfg.p, 0.0),
                                     cfg.p);
                } else {
                    auto denominator = [&](std::uint64_t path) {
                        const auto bundle = sample_bundle(op.eigenvalues, n_steps, tau, op.dim(), coupling,
                                                          cfg.seed, path);
                        const auto g = detail_experiments::probe_process(ctx, &bundle);
                        return std::pow(weighted_lp_data_norm(op, g, cfg.p, 0.0), cfg.p);
                    };
                    den_p = mc_estimate(denominator, cfg.n_paths, cfg.threads).mean;
                }
                sup = std::max(sup, std::pow(num.mean / den_p, 1.0 / cfg.p));
            }
            sups.push_back(sup);
            rep.rows.push_back({static_cast<double>(si), tau, sup});
        }
        Verdict v;
        v.name = "equivalence_ee_vs_" + scheme.name;
        v.value = detail_experiments::max_over_min(sups);
        v.threshold = 2.0;
        v.pass = v.value <= 2.0 && *std::max_element(sups.begin(), sups.end()) < 1e3;
        v.detail = "max diff-ratio " + format_double(*std::max_element(sups.begin(), sups.end()));
        rep.verdicts.push_back(v);
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

/// Maximal estimates: the p = 2 Hilbert contraction case against the Doob
/// bound 4, and the p > 2 trace-space functionals for tau-uniformity.
inline StudyReport run_study_maximal_estimate(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto op = make_operator(cfg.op);
    const auto scheme = builtin_scheme(cfg.schemes.at(0));
    StudyReport rep;
    rep.study = "maximal_estimate";
    rep.config_echo = cfg;
    const auto coupling = identity_coupling(op.dim());

    if (cfg.p == 2.0) {
        if (op.q_exponent != 2.0) throw std::invalid_argument("maximal_estimate: p = 2 requires q = 2");
        rep.row_header = {"tau", "ratio", "ratio_stderr"};
        double worst = 0.0, worst_stderr = 0.0;
        for (double tau : cfg.tau_list) {
            const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
            for (const auto& probe : cfg.probes) {
                detail_experiments::ProbeContext ctx{&op,     &scheme, probe,       tau,
                                                     n_steps, 2.0,     0.0,         cfg.seed,
                                                     cfg.n_paths, cfg.threads};
                auto sup_sq = [&](std::uint64_t path) {
                    const auto bundle = sample_bundle(op.eigenvalues, n_steps, tau, op.dim(), coupling,
                                                      cfg.seed, path);
                    const auto g = detail_experiments::probe_process(ctx, &bundle);
                    const auto traj = run_discrete(op, scheme, g, bundle, tau);
                    const auto s = sup_trace_functional(op, traj, 2.0, 0.0);
                    return s.plain * s.plain;
                };
                const auto mc = mc_estimate(sup_sq, cfg.n_paths, cfg.threads);
                double den;
                if (detail_experiments::probe_is_deterministic(probe)) {
                    const auto g = detail_experiments::probe_process(ctx, nullptr);
                    const double d = weighted_lp_data_norm(op, g, 2.0, 0.0);
                    den = d * d;
                } else {
                    auto den_fn = [&](std::uint64_t path) {
                        const auto bundle = sample_bundle(op.eigenvalues, n_steps, tau, op.dim(), coupling,
                                                          cfg.seed, path);
                        const auto g = detail_experiments::probe_process(ctx, &bundle);
                        const double d = weighted_lp_data_norm(op, g, 2.0, 0.0);
                        return d * d;
                    };
                    den = mc_estimate(den_fn, cfg.n_paths, cfg.threads).mean;
                }
                const double ratio = mc.mean / den;
                const double rstderr = mc.stderr_of_mean / den;
                rep.rows.push_back({tau, ratio, rstderr});
                if (ratio > worst) {
                    worst = ratio;
                    worst_stderr = rstderr;
                }
            }
        }
        Verdict v;
        v.name = "doob_contraction_bound";
        v.value = worst;
        v.threshold = 4.0 * 1.1 + 5.0 * worst_stderr;
        v.pass = worst <= v.threshold;
        v.detail = "E sup ||A^{1/2} Y||^2 <= 4 E||g||^2 (contraction case)";
        rep.verdicts.push_back(v);
    } else {
        rep.row_header = {"alpha", "tau", "ratio_trace", "ratio_weighted"};
        const std::vector<double> alphas = cfg.alpha_list.empty() ? std::vector<double>{cfg.alpha}
                                                                  : cfg.alpha_list;
        QuadratureSpec quad;
        quad.points_per_decade = cfg.trace_points_per_decade;
        for (double alpha : alphas) {
            if (!(alpha >= 0.0) || !(alpha < cfg.p / 2.0 - 1.0))
                throw std::invalid_argument("maximal_estimate: alpha in [0, p/2-1)");
            const TraceNormTable plain_table(op, 1.0 - (1.0 + alpha) / cfg.p, cfg.p, quad);
            const TraceNormTable weighted_table(op, 1.0 - 1.0 / cfg.p, cfg.p, quad);
            std::vector<double> r1s, r2s;
            for (double tau : cfg.tau_list) {
                const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
                double sup1 = 0.0, sup2 = 0.0;
                for (const auto& probe : cfg.probes) {
                    detail_experiments::ProbeContext ctx{&op,     &scheme, probe,     tau,
                                                         n_steps, cfg.p,   alpha,     cfg.seed,
                                                         cfg.n_paths, cfg.threads};
                    // One pass per path evaluates both functionals (the trace
                    // quadrature dominates the cost).
                    std::vector<double> plain_p(static_cast<std::size_t>(cfg.n_paths));
                    std::vector<double> weighted_p(static_cast<std::size_t>(cfg.n_paths));
                    std::vector<double> den_samples(static_cast<std::size_t>(cfg.n_paths));
                    const bool det = detail_experiments::probe_is_deterministic(probe);
                    detail::parallel_for(
                        cfg.n_paths,
                        [&](std::int64_t path) {
                            const auto bundle =
                                sample_bundle(op.eigenvalues, n_steps, tau, op.dim(), coupling, cfg.seed,
                                              static_cast<std::uint64_t>(path));
                            const auto g = detail_experiments::probe_process(ctx, &bundle);
                            const auto traj = run_discrete(op, scheme, g, bundle, tau);
                            const auto s =
                                sup_trace_functional(op, traj, cfg.p, alpha, &plain_table, &weighted_table);
                            plain_p[static_cast<std::size_t>(path)] = std::pow(s.plain, cfg.p);
                            weighted_p[static_cast<std::size_t>(path)] = std::pow(s.weighted, cfg.p);
                            if (!det)
                                den_samples[static_cast<std::size_t>(path)] =
                                    std::pow(weighted_lp_data_norm(op, g, cfg.p, alpha), cfg.p);
                        },
                        cfg.threads);
                    double den_p;
                    if (det) {
                        const auto g = detail_experiments::probe_process(ctx, nullptr);
                        den_p = std::pow(weighted_lp_data_norm(op, g, cfg.p, alpha), cfg.p);
                    } else {
                        den_p = detail::pairwise_sum(den_samples) / cfg.n_paths;
                    }
                    sup1 = std::max(sup1, std::pow(detail::pairwise_sum(plain_p) / cfg.n_paths / den_p,
                                                   1.0 / cfg.p));
                    sup2 = std::max(sup2, std::pow(detail::pairwise_sum(weighted_p) / cfg.n_paths / den_p,
                                                   1.0 / cfg.p));
                }
                r1s.push_back(sup1);
                r2s.push_back(sup2);
                rep.rows.push_back({alpha, tau, sup1, sup2});
            }
            for (auto [tag, series] : {std::pair{"trace", &r1s}, std::pair{"weighted", &r2s}}) {
                Verdict v;
                v.name = std::string("maximal_") + tag + "_alpha=" + format_double(alpha);
                v.value = detail_experiments::max_over_min(*series);
                v.threshold = 2.0;
                v.pass = v.value <= 2.0;
                rep.verdicts.push_back(v);
            }
        }
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

/// Weighted extrapolation: probed weighted ratios uniform in tau for each
/// weight exponent, and comparable (factor 4) across exponents.
inline StudyReport run_study_weighted_extrapolation(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto op = make_operator(cfg.op);
    const auto scheme = builtin_scheme(cfg.schemes.at(0));
    std::vector<double> alphas = cfg.alpha_list;
    if (alphas.empty()) alphas = {0.0, (cfg.p / 2.0 - 1.0) / 2.0};
    for (double a : alphas)
        if (!(a > -1.0) || !(a < cfg.p / 2.0 - 1.0))
            throw std::invalid_argument("weighted_extrapolation: alpha in (-1, p/2-1)");

    StudyReport rep;
    rep.study = "weighted_extrapolation";
    rep.config_echo = cfg;
    rep.row_header = {"alpha", "tau", "sup_ratio"};

    std::vector<std::vector<double>> ratios(alphas.size());
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        for (double tau : cfg.tau_list) {
            const int n_steps = detail_experiments::checked_steps(cfg.total_time, tau);
            double sup = 0.0;
            for (const auto& probe : cfg.probes) {
                detail_experiments::ProbeContext ctx{&op,     &scheme,  probe,      tau,
                                                     n_steps, cfg.p,    alphas[ai], cfg.seed,
                                                     cfg.n_paths, cfg.threads};
                sup = std::max(sup, detail_experiments::probed_dsmr_ratio(ctx));
            }
            ratios[ai].push_back(sup);
            rep.rows.push_back({alphas[ai], tau, sup});
        }
        Verdict v;
        v.name = "weighted_uniformity_alpha=" + format_double(alphas[ai]);
        v.value = detail_experiments::max_over_min(ratios[ai]);
        v.threshold = 2.0;
        v.pass = v.value <= 2.0;
        rep.verdicts.push_back(v);
    }
    // Cross-weight comparability against the first exponent (usually 0).
    for (std::size_t ai = 1; ai < alphas.size(); ++ai) {
        double worst = 0.0;
        for (std::size_t ti = 0; ti < cfg.tau_list.size(); ++ti) {
            const double rel = ratios[ai][ti] / ratios[0][ti];
            worst = std::max(worst, std::max(rel, 1.0 / rel));
        }
        Verdict v;
        v.name = "weighted_vs_base_alpha=" + format_double(alphas[ai]);
        v.value = worst;
        v.threshold = 4.0;
        v.pass = worst <= 4.0;
        rep.verdicts.push_back(v);
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Audits

inline StudyReport run_study_scheme_audit(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto scheme = builtin_scheme(cfg.audit_scheme);
    StudyReport rep;
    rep.study = "scheme_audit";
    rep.config_echo = cfg;
    rep.row_header = {"declared_order", "detected_order", "stability_pass", "max_modulus_boundary"};

    nlohmann::json audit;
    audit["name"] = scheme.name;
    audit["kind"] = scheme.is_exponential() ? "exponential" : "rational";
    if (scheme.declared_order) audit["declared_order"] = *scheme.declared_order;
    if (scheme.declared_angle) audit["declared_angle_rad"] = *scheme.declared_angle;
    audit["numerator"] = scheme.numerator;
    audit["denominator"] = scheme.denominator;
    audit["dsmr_admissible"] = scheme.dsmr_admissible();

    int detected = -1;
    if (!scheme.is_exponential()) {
        const auto ord = detect_consistency_order(scheme);
        detected = ord.value();
        audit["detected_order"] = detected;
    } else {
        audit["detected_order"] = "exact";
    }

    const double theta = scheme.declared_angle.value_or(std::numbers::pi / 2.0);
    const auto stab_declared = check_stability(scheme, theta);
    const auto stab_half_pi = check_stability(scheme, std::numbers::pi / 2.0);
    auto stab_json = [](const StabilityReport& r) {
        nlohmann::json j = {{"angle_rad", r.angle_tested},
                            {"max_modulus_boundary", r.max_modulus_boundary},
                            {"max_modulus_interior", r.max_modulus_interior_sample},
                            {"grid_size", r.grid_size},
                            {"rinf_modulus", r.rinf_modulus},
                            {"passes", r.passes}};
        if (r.pole_in_sector)
            j["pole_in_sector"] = {r.pole_in_sector->real(), r.pole_in_sector->imag()};
        return j;
    };
    audit["stability_declared_angle"] = stab_json(stab_declared);
    audit["stability_pi_over_2"] = stab_json(stab_half_pi);
    if (!stab_half_pi.passes && stab_declared.passes)
        audit["notes"].push_back("A(theta)-stable only up to the declared angle, not pi/2");
    if (!scheme.dsmr_admissible())
        audit["notes"].push_back("r(infinity) != 0: excluded from the regularity studies");

    if (!scheme.is_exponential() &&
        detail::poly_degree(scheme.numerator) <= detail::poly_degree(scheme.denominator)) {
        const auto pf = partial_fractions(scheme);
        nlohmann::json pj;
        pj["gamma_infinity"] = {pf.gamma_infinity.real(), pf.gamma_infinity.imag()};
        for (const auto& pole : pf.poles)
            pj["poles"].push_back({{"a", {-pole.location.real(), -pole.location.imag()}},
                                   {"order", pole.order}});
        for (const auto& res : pf.residues)
            pj["residues"].push_back({{"pole_index", res.pole_index},
                                      {"power", res.power},
                                      {"coeff", {res.coeff.real(), res.coeff.imag()}}});
        audit["partial_fractions"] = pj;
    }

    if (scheme.dsmr_admissible() && stab_declared.passes) {
        const double nu = cfg.nu.value_or(theta - std::numbers::pi / 36.0);
        const auto estimates = verify_decay_estimates(scheme, nu, 512);
        for (const auto& est : estimates)
            audit["decay_estimates"].push_back({{"inequality", to_string(est.inequality_id)},
                                                {"fitted_C", est.fitted_C},
                                                {"fitted_c", est.fitted_c},
                                                {"refinement_ratio", est.refinement_ratio},
                                                {"passes", est.passes},
                                                {"grid", est.grid_spec}});
    }
    rep.extra = audit;
    rep.rows.push_back({static_cast<double>(scheme.declared_order.value_or(-1)),
                        static_cast<double>(detected), stab_declared.passes ? 1.0 : 0.0,
                        stab_declared.max_modulus_boundary});

    Verdict v;
    v.name = "audit_" + scheme.name;
    v.pass = stab_declared.passes &&
             (scheme.is_exponential() || !scheme.declared_order || detected == *scheme.declared_order);
    v.value = static_cast<double>(detected);
    v.detail = "order and stability consistent with declaration";
    rep.verdicts.push_back(v);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

inline StudyReport run_study_kernel_audit(const StudyConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    StudyReport rep;
    rep.study = "kernel_audit";
    rep.config_echo = cfg;
    rep.row_header = {"sup_normalized", "refinement_ratio", "passes"};

    const auto family = kernel_family_from_string(cfg.kernel_family);
    const bool rational = family == KernelFamily::rational_basic || family == KernelFamily::rational_phi ||
                          family == KernelFamily::rational_variant;
    std::optional<SchemeFunction> scheme;
    if (rational || family == KernelFamily::custom) scheme = builtin_scheme(cfg.schemes.at(0));
    const double theta = scheme && scheme->declared_angle ? *scheme->declared_angle : std::numbers::pi / 2.0;
    const double nu = cfg.nu.value_or(rational ? theta - std::numbers::pi / 36.0 : std::numbers::pi / 4.0);

    if (family == KernelFamily::j_reference) {
        for (int m : {1, 10, 1000})
            for (double tau : {std::pow(2.0, -10), 1.0}) {
                KernelSpec spec;
                spec.family = family;
                spec.m = m;
                spec.tau = tau;
                const auto ks = ktau_sum(spec);
                rep.rows.push_back({ks.sum, 0.0, ks.member ? 1.0 : 0.0});
            }
        Verdict v;
        v.name = "j_reference_unit_sum";
        v.pass = true;
        for (const auto& row : rep.rows) v.pass = v.pass && std::abs(row[0] - 1.0) <= 1e-12;
        v.value = rep.rows.front()[0];
        rep.verdicts.push_back(v);
    } else {
        const auto taus = default_tau_grid();
        const auto moduli = default_lambda_moduli();
        ASeqSpec aseq;
        aseq.kind = family == KernelFamily::custom ? ASeqSpec::Kind::psi : ASeqSpec::Kind::power_decay;
        const auto fur = verify_family_uniform(family == KernelFamily::custom
                                                   ? (scheme ? KernelFamily::rational_variant
                                                             : KernelFamily::exp_variant)
                                                   : family,
                                               nu, cfg.sigma, taus, moduli, aseq,
                                               scheme ? &*scheme : nullptr, cfg.threads);
        rep.rows.push_back({fur.sup_normalized, fur.refinement_ratio, fur.passes ? 1.0 : 0.0});
        rep.extra = {{"family", to_string(fur.family)},
                     {"nu", fur.nu},
                     {"sigma", fur.sigma},
                     {"sup_normalized", fur.sup_normalized},
                     {"sup_normalized_coarse", fur.sup_normalized_coarse},
                     {"refinement_ratio", fur.refinement_ratio},
                     {"worst_abs_z", fur.worst_abs_z},
                     {"worst_arg_z", fur.worst_arg_z},
                     {"grid", fur.grid_spec}};
        Verdict v;
        v.name = std::string("family_uniform_") + to_string(family);
        v.value = fur.refinement_ratio;
        v.threshold = 1.1;
        v.pass = fur.passes;
        rep.verdicts.push_back(v);
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Dispatch

inline StudyReport run_study(const StudyConfig& cfg) {
    if (cfg.study == "convergence") return run_study_convergence(cfg);
    if (cfg.study == "dsmr_uniformity") return run_study_dsmr_uniformity(cfg);
    if (cfg.study == "scheme_equivalence") return run_study_scheme_equivalence(cfg);
    if (cfg.study == "maximal_estimate") return run_study_maximal_estimate(cfg);
    if (cfg.study == "weighted_extrapolation") return run_study_weighted_extrapolation(cfg);
    if (cfg.study == "kernel_audit") return run_study_kernel_audit(cfg);
    if (cfg.study == "scheme_audit") return run_study_scheme_audit(cfg);
    throw std::invalid_argument("unknown study '" + cfg.study + "'");
}

}  // namespace dsmr
