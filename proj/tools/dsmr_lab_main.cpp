// dsmr-lab: study runner and audits for the temporal discretization library.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "dsmr/experiments.hpp"

namespace {

dsmr::StudyConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    f >> j;
    return j.get<dsmr::StudyConfig>();
}

void write_outputs(const dsmr::StudyReport& rep, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/report.json");
        f << nlohmann::json(rep).dump(2) << "\n";
    }
    {
        std::ofstream f(out_dir + "/rows.csv");
        f << dsmr::rows_csv(rep);
    }
}

void print_verdicts(const dsmr::StudyReport& rep) {
    for (const auto& v : rep.verdicts)
        std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << v.name << ": value=" << dsmr::format_double(v.value)
                  << (v.threshold != 0.0 ? " threshold=" + dsmr::format_double(v.threshold) : "")
                  << (v.detail.empty() ? "" : " (" + v.detail + ")") << "\n";
    std::cout << (rep.pass() ? "PASS" : "FAIL") << " (" << dsmr::format_double(rep.wall_time_s) << " s)\n";
}

/// Plain-text coefficient file: one line "num: c0 c1 ...", one line "den: c0 c1 ...".
dsmr::SchemeFunction load_coeff_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open coefficient file " + path);
    dsmr::SchemeFunction s;
    s.kind = dsmr::SchemeKind::rational;
    s.name = std::filesystem::path(path).stem().string();
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        std::vector<double> coeffs;
        for (double v; is >> v;) coeffs.push_back(v);
        if (tag == "num:") s.numerator = coeffs;
        else if (tag == "den:") s.denominator = coeffs;
        else if (!tag.empty()) throw std::runtime_error("coefficient file: unknown line tag '" + tag + "'");
    }
    if (s.numerator.empty() || s.denominator.empty())
        throw std::runtime_error("coefficient file needs both 'num:' and 'den:' lines");
    return s;
}

int cmd_verify(const std::string& report_path) {
    std::ifstream f(report_path);
    if (!f) throw std::runtime_error("cannot open report " + report_path);
    nlohmann::json j;
    f >> j;
    const auto cfg = j.at("config").get<dsmr::StudyConfig>();
    const auto rerun = dsmr::run_study(cfg);
    const nlohmann::json jr = rerun;

    bool ok = true;
    if (j.at("rows") != jr.at("rows")) {
        std::cout << "rows differ\n";
        ok = false;
    }
    if (j.at("verdicts") != jr.at("verdicts")) {
        std::cout << "verdicts differ\n";
        ok = false;
    }
    if (j.at("rng_algorithm") != jr.at("rng_algorithm")) {
        std::cout << "rng algorithm differs\n";
        ok = false;
    }
    std::cout << (ok ? "verified: recomputation matches" : "verification FAILED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsmr-lab: temporal discretization studies for stochastic evolution equations"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a study from a JSON config");
    std::string study, config_path, out_dir = "out";
    std::uint64_t seed = 0;
    int paths = 0, threads = -1;
    std::string dump_dir;
    run->add_option("study", study,
                    "convergence | dsmr_uniformity | scheme_equivalence | maximal_estimate | "
                    "weighted_extrapolation | kernel_audit | scheme_audit")
        ->required();
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--paths", paths, "override n_paths");
    run->add_option("--threads", threads, "worker threads (0 = hardware)");
    run->add_option("--out", out_dir, "output directory (report.json, rows.csv)");
    run->add_option("--dump-paths", dump_dir, "dump sampled increment arrays to this directory");

    // scheme audit
    auto* scheme_cmd = app.add_subcommand("scheme", "scheme analysis");
    auto* scheme_audit = scheme_cmd->add_subcommand("audit", "order, stability, partial fractions, decay constants");
    std::string scheme_arg, scheme_out;
    scheme_audit->add_option("name", scheme_arg, "builtin scheme name or coefficient file")->required();
    scheme_audit->add_option("--out", scheme_out, "write the JSON report here (default: stdout)");

    // kernels audit
    auto* kernels_cmd = app.add_subcommand("kernels", "kernel-class analysis");
    auto* kernels_audit = kernels_cmd->add_subcommand("audit", "class sums and uniformity over the default grid");
    std::string family = "exp_basic", kernel_scheme = "implicit_euler", kernels_out;
    double sigma = 0.25;
    kernels_audit->add_option("--family", family, "kernel family")->required();
    kernels_audit->add_option("--scheme", kernel_scheme, "scheme for rational families");
    kernels_audit->add_option("--sigma", sigma, "decay exponent in (0, 1/2)");
    kernels_audit->add_option("--out", kernels_out, "write the JSON report here (default: stdout)");

    // verify
    auto* verify = app.add_subcommand("verify", "re-run a report's config and diff the rows");
    std::string report_path;
    verify->add_option("report", report_path, "report.json produced by `run`")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = load_config(config_path);
            cfg.study = study;
            if (run->count("--seed")) cfg.seed = seed;
            if (run->count("--paths")) cfg.n_paths = paths;
            if (run->count("--threads")) cfg.threads = threads;
            if (!dump_dir.empty()) {
                std::filesystem::create_directories(dump_dir);
                cfg.dump_paths_dir = dump_dir;
            }
            const auto rep = dsmr::run_study(cfg);
            write_outputs(rep, out_dir);
            print_verdicts(rep);
            return rep.pass() ? 0 : 1;
        }
        if (*scheme_audit) {
            dsmr::StudyConfig cfg;
            cfg.study = "scheme_audit";
            if (std::filesystem::exists(scheme_arg)) {
                // Audit a coefficient file through the same code path used for
                // builtins by evaluating it directly.
                const auto scheme = load_coeff_file(scheme_arg);
                nlohmann::json out;
                out["name"] = scheme.name;
                out["numerator"] = scheme.numerator;
                out["denominator"] = scheme.denominator;
                out["detected_order"] = dsmr::detect_consistency_order(scheme).value_or(-1);
                const auto stab = dsmr::check_stability(scheme, std::numbers::pi / 2.0);
                out["stability_pi_over_2"] = {{"passes", stab.passes},
                                              {"max_modulus_boundary", stab.max_modulus_boundary}};
                if (dsmr::detail::poly_degree(scheme.numerator) <=
                    dsmr::detail::poly_degree(scheme.denominator)) {
                    const auto pf = dsmr::partial_fractions(scheme);
                    out["gamma_infinity"] = {pf.gamma_infinity.real(), pf.gamma_infinity.imag()};
                }
                const std::string text = out.dump(2) + "\n";
                if (scheme_out.empty()) std::cout << text;
                else std::ofstream(scheme_out) << text;
                return 0;
            }
            cfg.audit_scheme = scheme_arg;
            const auto rep = dsmr::run_study(cfg);
            const std::string text = nlohmann::json(rep).dump(2) + "\n";
            if (scheme_out.empty()) std::cout << text;
            else std::ofstream(scheme_out) << text;
            return rep.pass() ? 0 : 1;
        }
        if (*kernels_audit) {
            dsmr::StudyConfig cfg;
            cfg.study = "kernel_audit";
            cfg.kernel_family = family;
            cfg.schemes = {kernel_scheme};
            cfg.sigma = sigma;
            const auto rep = dsmr::run_study(cfg);
            const std::string text = nlohmann::json(rep).dump(2) + "\n";
            if (kernels_out.empty()) std::cout << text;
            else std::ofstream(kernels_out) << text;
            print_verdicts(rep);
            return rep.pass() ? 0 : 1;
        }
        if (*verify) return cmd_verify(report_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
