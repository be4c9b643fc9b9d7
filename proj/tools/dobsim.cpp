#include "dobsim/io.hpp"
#include "dobsim/scenario.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace dobsim;

namespace {

constexpr int kExitError = 1;
constexpr int kExitSchema = 2;

int worker_count(std::size_t jobs) {
    if (const char* env = std::getenv("DOBSIM_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return std::min<std::size_t>(v, jobs);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min<std::size_t>(hw ? hw : 1, jobs));
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

int cmd_run(const std::string& path, const std::string& out_override) {
    Scenario sc = load_scenario(path);
    if (!out_override.empty()) sc.out_dir = out_override;
    fs::create_directories(sc.out_dir);

    const RunLog log = execute(sc);
    write_run_csv(sc.out_dir + "/run.csv", log);
    write_summary_json(sc.out_dir + "/summary.json", sc, log);
    write_run_plots(sc.out_dir, log);

    std::cout << "verdict: " << to_string(log.verdict);
    if (log.verdict == Verdict::Divergent) std::cout << " (at t = " << log.diverged_at << " s)";
    std::cout << "\nsettled max ||e||   = " << log.settled_max_e
              << "\nsettled max ||e_D|| = " << log.settled_max_eD
              << "\ngamma (a posteriori) = " << log.gamma_post << "\noutputs in " << sc.out_dir
              << std::endl;
    return 0;  // a divergent run is a result, not a failure
}

Scenario apply_axis(Scenario sc, const std::string& axis, double value) {
    if (axis == "g_dob") {
        sc.controller.g_dob.setConstant(value);
    } else if (axis == "mn_scale") {
        sc.controller.M_n *= value;
    } else if (axis == "mn_offdiag_scale") {
        const Mat diag = sc.controller.M_n.diagonal().asDiagonal();
        sc.controller.M_n = diag + value * (sc.controller.M_n - diag);
    } else {
        throw std::invalid_argument("unknown sweep axis: " + axis);
    }
    return sc;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::vector<double>& values,
              const std::string& out_override) {
    if (values.empty()) throw std::invalid_argument("sweep: the values list must not be empty");
    // 0 is meaningful for mn_offdiag_scale (diagonal-only nominal inertia)
    const double lo = axis == "mn_offdiag_scale" ? -1e-12 : 0.0;
    for (double v : values)
        if (!(v > lo)) throw std::invalid_argument("sweep: values must be positive");

    Scenario base = load_scenario(path);
    if (!out_override.empty()) base.out_dir = out_override;
    fs::create_directories(base.out_dir);

    struct VariantResult {
        double value;
        RunLog log;
        double gamma_apriori = std::nan("");
        bool bandwidth_ok = true;
    };
    std::vector<VariantResult> results(values.size());

    // independent variants on a bounded worker pool; results land in input order
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            const Scenario sc = apply_axis(base, axis, values[i]);
            VariantResult r;
            r.value = values[i];
            r.log = execute(sc);
            if (sc.analysis.declared_sups) {
                const auto& s = *sc.analysis.declared_sups;
                r.gamma_apriori = ultimate_bound_gamma(r.log.betas, sc.controller.g_dob.minCoeff(),
                                                       s.qddot_des, s.qdot, s.qdot_des);
            }
            r.bandwidth_ok = sc.controller.g_dob.maxCoeff() <=
                             bandwidth_upper_bound(r.log.betas, sc.controller.g_v);
            results[i] = std::move(r);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < worker_count(values.size()); ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    std::ofstream csv(base.out_dir + "/sweep.csv");
    csv << "value,verdict,settled_max_e,settled_max_eD,gamma_post,gamma_apriori,bandwidth_ok\n";
    std::vector<PlotSeries> overlay;
    for (const auto& r : results) {
        csv << fmt(r.value) << ',' << to_string(r.log.verdict) << ',' << fmt(r.log.settled_max_e)
            << ',' << fmt(r.log.settled_max_eD) << ',' << fmt(r.log.gamma_post) << ','
            << fmt(r.gamma_apriori) << ',' << (r.bandwidth_ok ? "true" : "false") << '\n';
        PlotSeries s{axis + " = " + fmt6_label(r.value), {}};
        for (const auto& step : r.log.steps) s.points.emplace_back(step.t, step.e.norm());
        overlay.push_back(std::move(s));
        std::cout << axis << " = " << r.value << ": " << to_string(r.log.verdict)
                  << ", settled max ||e_D|| = " << r.log.settled_max_eD << '\n';
    }
    write_svg_plot(base.out_dir + "/sweep_error_norm.svg", "Error norm across " + axis, "t [s]",
                   "||e|| [rad]", overlay);
    std::cout << "outputs in " << base.out_dir << std::endl;
    return 0;
}

int cmd_check(const std::string& path) {
    const Scenario sc = load_scenario(path);
    const int n = sc.model.dof();
    const WorkspaceBox box =
        sc.analysis.box ? *sc.analysis.box : WorkspaceBox::full_revolution(n, 20.0);
    const BetaConstants b =
        estimate_betas(sc.model, sc.controller, box, sc.disturbances.declared_load_bound);
    const Dominance dom = nominal_dominance(sc.model, sc.controller, box);
    const double g_bound = bandwidth_upper_bound(b, sc.controller.g_v);
    const double g_max = sc.controller.g_dob.maxCoeff();

    std::cout << "beta_M    in [" << b.beta_M_min << ", " << b.beta_M_max << "]\n"
              << "beta_C    = " << b.beta_C << "\n"
              << "beta_g    = " << b.beta_g << "\n"
              << "beta_dM   in [" << b.beta_dM_min << ", " << b.beta_dM_max << "]\n"
              << "beta_fric = " << b.beta_fric_max << "\n"
              << "beta_load = " << b.beta_load_max << "\n"
              << "beta_Mn   in [" << b.beta_Mn_min << ", " << b.beta_Mn_max << "]\n"
              << "nominal inertia: " << to_string(dom) << "\n";
    if (std::isfinite(g_bound)) {
        std::cout << "bandwidth bound: g_dob <= " << g_bound << " rad/s -> "
                  << (g_max <= g_bound ? "ok" : "WARNING: exceeded") << " (g_dob = " << g_max
                  << ")\n";
    } else {
        std::cout << "bandwidth bound: unconstrained (exact velocity, g_v = 0)\n";
    }
    if (sc.analysis.declared_sups) {
        const auto& s = *sc.analysis.declared_sups;
        std::cout << "gamma (a priori, declared suprema) = "
                  << ultimate_bound_gamma(b, sc.controller.g_dob.minCoeff(), s.qddot_des, s.qdot,
                                          s.qdot_des)
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust position control laboratory: DOb-based controller on planar arms"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, axis;
    std::vector<double> values;

    auto* run = app.add_subcommand("run", "simulate a scenario, write CSV/JSON/SVG outputs");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory (overrides the scenario)");

    auto* sweep = app.add_subcommand("sweep", "run a scenario across one parameter axis");
    sweep->add_option("scenario", scenario_path, "scenario JSON file")->required();
    sweep->add_option("--axis", axis, "g_dob | mn_scale | mn_offdiag_scale")->required();
    sweep->add_option("--values", values, "comma separated values")->required()->delimiter(',');
    sweep->add_option("--out", out_dir, "output directory (overrides the scenario)");

    auto* check = app.add_subcommand("check", "static pre-flight: betas, dominance, bandwidth");
    check->add_option("scenario", scenario_path, "scenario JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(scenario_path, axis, values, out_dir);
        if (check->parsed()) return cmd_check(scenario_path);
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << std::endl;
        return kExitSchema;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitError;
    }
    return kExitError;
}
