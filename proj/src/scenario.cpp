#include "dobsim/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace dobsim {
namespace {

using nlohmann::json;

std::string key_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void expect_object(const json& j, const std::string& path,
                   const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ScenarioError(path, "expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ScenarioError(key_path(path, k), "unknown key");
}

const json* find(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const std::string& path, const std::string& key) {
    const json* p = find(j, key);
    if (!p) throw ScenarioError(key_path(path, key), "missing required key");
    return *p;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ScenarioError(path, "expected a number");
    return j.get<double>();
}

double number_or(const json& j, const std::string& path, const std::string& key, double dflt) {
    const json* p = find(j, key);
    return p ? as_number(*p, key_path(path, key)) : dflt;
}

bool bool_or(const json& j, const std::string& path, const std::string& key, bool dflt) {
    const json* p = find(j, key);
    if (!p) return dflt;
    if (!p->is_boolean()) throw ScenarioError(key_path(path, key), "expected a boolean");
    return p->get<bool>();
}

std::string string_or(const json& j, const std::string& path, const std::string& key,
                      const std::string& dflt) {
    const json* p = find(j, key);
    if (!p) return dflt;
    if (!p->is_string()) throw ScenarioError(key_path(path, key), "expected a string");
    return p->get<std::string>();
}

Vec as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw ScenarioError(path, "expected an array of numbers");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<int>(i)] = as_number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

// per-joint quantity given either as a scalar or as an n-vector
Vec per_joint(const json& j, const std::string& path, int n) {
    if (j.is_number()) return Vec::Constant(n, j.get<double>());
    Vec v = as_vector(j, path);
    if (v.size() != n) throw ScenarioError(path, "expected " + std::to_string(n) + " entries");
    return v;
}

Vec per_joint_or(const json& j, const std::string& path, const std::string& key, int n,
                 double dflt) {
    const json* p = find(j, key);
    if (!p) return Vec::Constant(n, dflt);
    return per_joint(*p, key_path(path, key), n);
}

ManipulatorModel parse_model(const json& j, const std::string& path) {
    expect_object(j, path, {"links", "inertia_units", "gravity_accel", "viscous_friction",
                            "coulomb_friction", "coulomb_smoothing"});
    ManipulatorModel m;

    double inertia_scale = 1.0;
    const std::string units = string_or(j, path, "inertia_units", "kg*m^2");
    if (units == "g*cm^2")
        inertia_scale = 1e-7;
    else if (units != "kg*m^2")
        throw ScenarioError(key_path(path, "inertia_units"),
                            "expected \"kg*m^2\" or \"g*cm^2\"");

    const json& links = require(j, path, "links");
    if (!links.is_array() || links.empty())
        throw ScenarioError(key_path(path, "links"), "expected a non-empty array");
    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string lp = key_path(path, "links") + "[" + std::to_string(i) + "]";
        expect_object(links[i], lp, {"length", "mass", "com_offset", "inertia_com"});
        LinkParams link;
        link.length = as_number(require(links[i], lp, "length"), key_path(lp, "length"));
        link.mass = as_number(require(links[i], lp, "mass"), key_path(lp, "mass"));
        link.com_offset = number_or(links[i], lp, "com_offset", link.length / 2.0);
        link.inertia_com =
            inertia_scale *
            as_number(require(links[i], lp, "inertia_com"), key_path(lp, "inertia_com"));
        m.links.push_back(link);
    }

    const int n = m.dof();
    m.gravity_accel = number_or(j, path, "gravity_accel", 0.0);
    m.viscous_friction = per_joint_or(j, path, "viscous_friction", n, 0.0);
    m.coulomb_friction = per_joint_or(j, path, "coulomb_friction", n, 0.0);
    m.coulomb_smoothing = number_or(j, path, "coulomb_smoothing", 1e-3);
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(path, e.what());
    }
    return m;
}

Mat parse_nominal_inertia(const json& j, const std::string& path, int n) {
    if (j.is_number()) return j.get<double>() * Mat::Identity(n, n);
    if (!j.is_array()) throw ScenarioError(path, "expected a scalar, a diagonal, or a matrix");
    if (!j.empty() && j[0].is_array()) {
        if (static_cast<int>(j.size()) != n) throw ScenarioError(path, "expected n rows");
        Mat M(n, n);
        for (int r = 0; r < n; ++r) {
            const Vec row = as_vector(j[r], path + "[" + std::to_string(r) + "]");
            if (row.size() != n)
                throw ScenarioError(path + "[" + std::to_string(r) + "]", "expected n entries");
            M.row(r) = row;
        }
        return M;
    }
    const Vec d = per_joint(j, path, n);
    return d.asDiagonal();
}

ControllerConfig parse_controller(const json& j, const std::string& path, int n) {
    expect_object(j, path, {"M_n", "g_dob", "K_D", "K_P", "g_v", "tau_sat"});
    ControllerConfig c;
    c.M_n = parse_nominal_inertia(require(j, path, "M_n"), key_path(path, "M_n"), n);
    c.g_dob = per_joint(require(j, path, "g_dob"), key_path(path, "g_dob"), n);
    c.K_D = per_joint(require(j, path, "K_D"), key_path(path, "K_D"), n);
    c.K_P = per_joint(require(j, path, "K_P"), key_path(path, "K_P"), n);
    c.g_v = number_or(j, path, "g_v", 0.0);
    c.tau_sat = number_or(j, path, "tau_sat", 0.0);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(path, e.what());
    }
    return c;
}

Reference parse_reference(const json& j, const std::string& path, int n) {
    const std::set<std::string> common = {"kind"};
    const std::string kind =
        string_or(j, path, "kind", "");
    Reference r;
    if (kind == "step-regulation" || kind == "smoothed-step") {
        expect_object(j, path, {"kind", "start", "target", "step_time", "smoothing_tau"});
        r.kind = kind == "step-regulation" ? RefKind::StepRegulation : RefKind::SmoothedStep;
        r.q_target = per_joint(require(j, path, "target"), key_path(path, "target"), n);
        r.q_start = per_joint_or(j, path, "start", n, 0.0);
        r.step_time = number_or(j, path, "step_time", 0.0);
        r.smoothing_tau = number_or(j, path, "smoothing_tau", 0.02);
        if (r.kind == RefKind::SmoothedStep && !(r.smoothing_tau > 0.0))
            throw ScenarioError(key_path(path, "smoothing_tau"), "must be > 0");
    } else if (kind == "joint-circle") {
        expect_object(j, path, {"kind", "center", "amplitude", "period", "phase"});
        r.kind = RefKind::JointCircle;
        r.center = per_joint(require(j, path, "center"), key_path(path, "center"), n);
        r.amplitude = per_joint(require(j, path, "amplitude"), key_path(path, "amplitude"), n);
        r.period = as_number(require(j, path, "period"), key_path(path, "period"));
        r.phase = number_or(j, path, "phase", 0.0);
        if (!(r.period > 0.0)) throw ScenarioError(key_path(path, "period"), "must be > 0");
    } else if (kind == "operational-circle") {
        expect_object(j, path, {"kind", "center", "radius", "period"});
        r.kind = RefKind::OperationalCircle;
        const Vec c = as_vector(require(j, path, "center"), key_path(path, "center"));
        if (c.size() != 2) throw ScenarioError(key_path(path, "center"), "expected [x, y]");
        r.op_center = {c[0], c[1]};
        r.op_radius = as_number(require(j, path, "radius"), key_path(path, "radius"));
        r.period = as_number(require(j, path, "period"), key_path(path, "period"));
        if (r.op_radius < 0.0) throw ScenarioError(key_path(path, "radius"), "must be >= 0");
        if (!(r.period > 0.0)) throw ScenarioError(key_path(path, "period"), "must be > 0");
    } else if (kind == "custom-samples") {
        expect_object(j, path, {"kind", "sample_dt", "q", "qdot", "qddot"});
        r.kind = RefKind::CustomSamples;
        r.sample_dt = as_number(require(j, path, "sample_dt"), key_path(path, "sample_dt"));
        if (!(r.sample_dt > 0.0)) throw ScenarioError(key_path(path, "sample_dt"), "must be > 0");
        auto parse_rows = [&](const char* key, std::vector<Vec>& out) {
            const json& rows = require(j, path, key);
            const std::string rp = key_path(path, key);
            if (!rows.is_array() || rows.size() < 2)
                throw ScenarioError(rp, "expected at least two sample rows");
            for (std::size_t i = 0; i < rows.size(); ++i)
                out.push_back(per_joint(rows[i], rp + "[" + std::to_string(i) + "]", n));
        };
        parse_rows("q", r.qs);
        parse_rows("qdot", r.qds);
        parse_rows("qddot", r.qdds);
        if (r.qds.size() != r.qs.size() || r.qdds.size() != r.qs.size())
            throw ScenarioError(path, "q, qdot, qddot must have the same number of rows");
    } else {
        throw ScenarioError(key_path(path, "kind"),
                            "expected one of step-regulation, smoothed-step, joint-circle, "
                            "operational-circle, custom-samples");
    }
    (void)common;
    return r;
}

DisturbanceSchedule parse_disturbances(const json& j, const std::string& path, int n) {
    expect_object(j, path, {"load_steps", "declared_load_bound"});
    DisturbanceSchedule d;
    if (const json* steps = find(j, "load_steps")) {
        const std::string sp = key_path(path, "load_steps");
        if (!steps->is_array()) throw ScenarioError(sp, "expected an array");
        for (std::size_t i = 0; i < steps->size(); ++i) {
            const std::string ep = sp + "[" + std::to_string(i) + "]";
            expect_object((*steps)[i], ep, {"time", "tau_load"});
            const double t = as_number(require((*steps)[i], ep, "time"), key_path(ep, "time"));
            const Vec load =
                per_joint(require((*steps)[i], ep, "tau_load"), key_path(ep, "tau_load"), n);
            d.load_steps.emplace_back(t, load);
        }
    }
    double max_load = 0.0;
    for (const auto& [t, v] : d.load_steps) max_load = std::max(max_load, v.norm());
    d.declared_load_bound = number_or(j, path, "declared_load_bound", max_load);
    try {
        d.validate(n);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(path, e.what());
    }
    return d;
}

SimConfig parse_sim(const json& j, const std::string& path, int n) {
    expect_object(j, path,
                  {"dt", "duration", "integrator", "divergence_threshold", "log_decimation",
                   "controller_mode", "initial_error", "initial_qdot", "start_on_reference",
                   "noise"});
    SimConfig s;
    s.dt = number_or(j, path, "dt", 1e-3);
    s.duration = as_number(require(j, path, "duration"), key_path(path, "duration"));
    const std::string integ = string_or(j, path, "integrator", "rk4");
    if (integ == "rk4")
        s.integrator = Integrator::RK4;
    else if (integ == "euler")
        s.integrator = Integrator::Euler;
    else
        throw ScenarioError(key_path(path, "integrator"), "expected \"rk4\" or \"euler\"");
    s.divergence_threshold = number_or(j, path, "divergence_threshold", 10.0);
    s.log_decimation = static_cast<int>(number_or(j, path, "log_decimation", 1));
    const std::string mode = string_or(j, path, "controller_mode", "continuous");
    if (mode == "continuous")
        s.controller_mode = ControllerMode::Continuous;
    else if (mode == "sampled")
        s.controller_mode = ControllerMode::Sampled;
    else
        throw ScenarioError(key_path(path, "controller_mode"),
                            "expected \"continuous\" or \"sampled\"");
    if (find(j, "initial_error"))
        s.initial_error = per_joint(*find(j, "initial_error"), key_path(path, "initial_error"), n);
    if (find(j, "initial_qdot"))
        s.initial_qdot = per_joint(*find(j, "initial_qdot"), key_path(path, "initial_qdot"), n);
    s.start_on_reference = bool_or(j, path, "start_on_reference", false);
    if (const json* noise = find(j, "noise")) {
        const std::string np = key_path(path, "noise");
        expect_object(*noise, np, {"amplitude", "seed"});
        s.noise_enabled = true;
        s.noise_amplitude =
            as_number(require(*noise, np, "amplitude"), key_path(np, "amplitude"));
        // determinism of noisy runs: the seed is mandatory, not defaulted
        const json& seed = require(*noise, np, "seed");
        if (!seed.is_number_unsigned())
            throw ScenarioError(key_path(np, "seed"), "expected an unsigned integer");
        s.noise_seed = seed.get<std::uint64_t>();
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(path, e.what());
    }
    return s;
}

AnalysisConfig parse_analysis(const json& j, const std::string& path, int n) {
    expect_object(j, path, {"settle_fraction", "converged_e_tol", "converged_eD_tol",
                            "workspace", "declared_sups"});
    AnalysisConfig a;
    a.settle_fraction = number_or(j, path, "settle_fraction", 0.2);
    a.converged_e_tol = number_or(j, path, "converged_e_tol", 1e-3);
    a.converged_eD_tol = number_or(j, path, "converged_eD_tol", 1e-2);
    if (!(a.settle_fraction > 0.0 && a.settle_fraction <= 1.0))
        throw ScenarioError(key_path(path, "settle_fraction"), "must lie in (0, 1]");
    if (const json* w = find(j, "workspace")) {
        const std::string wp = key_path(path, "workspace");
        expect_object(*w, wp, {"q_min", "q_max", "qdot_max", "grid_points_per_dim"});
        WorkspaceBox box;
        box.q_min = per_joint(require(*w, wp, "q_min"), key_path(wp, "q_min"), n);
        box.q_max = per_joint(require(*w, wp, "q_max"), key_path(wp, "q_max"), n);
        box.qdot_max = per_joint(require(*w, wp, "qdot_max"), key_path(wp, "qdot_max"), n);
        box.grid_points_per_dim = static_cast<int>(number_or(*w, wp, "grid_points_per_dim", 41));
        try {
            box.validate(n);
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(wp, e.what());
        }
        a.box = box;
    }
    if (const json* s = find(j, "declared_sups")) {
        const std::string sp = key_path(path, "declared_sups");
        expect_object(*s, sp, {"qddot_des", "qdot", "qdot_des"});
        DeclaredSups sups;
        sups.qddot_des = as_number(require(*s, sp, "qddot_des"), key_path(sp, "qddot_des"));
        sups.qdot = as_number(require(*s, sp, "qdot"), key_path(sp, "qdot"));
        sups.qdot_des = as_number(require(*s, sp, "qdot_des"), key_path(sp, "qdot_des"));
        a.declared_sups = sups;
    }
    return a;
}

}  // namespace

Scenario parse_scenario(const json& j) {
    expect_object(j, "", {"model", "controller", "reference", "disturbances", "sim", "analysis",
                          "output"});
    Scenario sc;
    sc.model = parse_model(require(j, "", "model"), "model");
    const int n = sc.model.dof();
    sc.controller = parse_controller(require(j, "", "controller"), "controller", n);
    sc.reference = parse_reference(require(j, "", "reference"), "reference", n);
    if (const json* d = find(j, "disturbances"))
        sc.disturbances = parse_disturbances(*d, "disturbances", n);
    sc.sim = parse_sim(require(j, "", "sim"), "sim", n);
    if (const json* a = find(j, "analysis")) sc.analysis = parse_analysis(*a, "analysis", n);
    if (const json* o = find(j, "output")) {
        expect_object(*o, "output", {"dir"});
        sc.out_dir = string_or(*o, "output", "dir", sc.out_dir);
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path, "cannot open scenario file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ScenarioError(path, std::string("JSON parse error: ") + e.what());
    }
    return parse_scenario(j);
}

Reference build_reference(const Scenario& sc) {
    if (sc.reference.kind != RefKind::OperationalCircle) return sc.reference;
    return operational_to_joint(sc.model, sc.reference.op_center, sc.reference.op_radius,
                                sc.reference.period, sc.sim.duration, sc.sim.dt / 2.0);
}

RunLog execute(const Scenario& sc) {
    return run_scenario(sc.model, sc.controller, build_reference(sc), sc.disturbances, sc.sim,
                        sc.analysis);
}

}  // namespace dobsim
