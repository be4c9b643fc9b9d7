#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dobsim/analysis.hpp"

#include <cmath>

using namespace dobsim;

namespace {

ManipulatorModel planar_2r() {
    ManipulatorModel m;
    m.links = {{0.06, 0.67, 0.03, 624e-7}, {0.06, 0.67, 0.03, 624e-7}};
    m.gravity_accel = 0;
    m.viscous_friction = Vec::Constant(2, 0.01);
    m.coulomb_friction = Vec::Zero(2);
    return m;
}

Mat dominant_mn_2r() {
    Mat Mn(2, 2);
    Mn << 0.00457675, 0.000795265, 0.000795265, 0.00120468;
    return Mn;
}

ControllerConfig cfg_2r(double g = 200.0) {
    ControllerConfig c;
    c.M_n = dominant_mn_2r();
    c.g_dob = Vec::Constant(2, g);
    c.K_D = Vec::Constant(2, 25.0);
    c.K_P = Vec::Constant(2, 250.0);
    return c;
}

WorkspaceBox box_2r() {
    WorkspaceBox b = WorkspaceBox::full_revolution(2, 5.0, 21);
    return b;
}

RunLog circle_run(double duration, double dt = 1e-4) {
    ManipulatorModel m = planar_2r();
    // analytic joint circle: reference position/velocity/acceleration are
    // exactly consistent, so only integration error enters the comparisons
    Reference ref;
    ref.kind = RefKind::JointCircle;
    ref.center = Vec::Constant(2, 0.6);
    ref.amplitude = Vec::Constant(2, 0.15);
    ref.period = 2.0;
    SimConfig sim;
    sim.dt = dt;
    sim.duration = duration;
    sim.start_on_reference = true;
    AnalysisConfig ana;
    ana.box = WorkspaceBox::full_revolution(2, 5.0, 5);
    return run_scenario(m, cfg_2r(), ref, {}, sim, ana);
}

LogStep synthetic_step(double t, const Vec& e, const Vec& edot) {
    LogStep s;
    s.t = t;
    s.e = e;
    s.edot = edot;
    return s;
}

}  // namespace

TEST_CASE("integral form of the dynamic error has an exact trapezoid value") {
    // e(t) = t per joint: the trapezoid rule is exact for linear integrands,
    // so e_D = edot + K_D e + K_P t^2 / 2 holds to roundoff.
    RunLog log;
    log.n = 1;
    const double dt = 0.1;
    for (int k = 0; k <= 10; ++k) {
        const double t = k * dt;
        log.steps.push_back(synthetic_step(t, Vec::Constant(1, t), Vec::Constant(1, 1.0)));
    }
    const auto eD = dynamic_error(log, Vec::Constant(1, 2.0), Vec::Constant(1, 3.0));
    REQUIRE(eD.size() == log.steps.size());
    for (int k = 0; k <= 10; ++k) {
        const double t = k * dt;
        CHECK(eD[k][0] == doctest::Approx(1.0 + 2.0 * t + 3.0 * t * t / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("state-based and integral-form dynamic errors agree on a tracking run") {
    // fine step: the trapezoid error of the integral form concentrates in
    // the fast observer transient and shrinks quadratically with dt
    const RunLog log = circle_run(1.0, 2e-5);
    REQUIRE(log.verdict != Verdict::Divergent);
    const ControllerConfig cfg = cfg_2r();
    const auto eD = dynamic_error(log, cfg.K_D, cfg.K_P);
    double max_diff = 0.0, max_eD = 0.0;
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        max_diff = std::max(max_diff, (eD[i] - log.steps[i].e_D).norm());
        max_eD = std::max(max_eD, log.steps[i].eD_norm);
    }
    CHECK(max_diff < 1e-6 + 2e-4 * max_eD);
}

TEST_CASE("lumped disturbance assembles the published terms") {
    ManipulatorModel m = planar_2r();
    m.gravity_accel = 9.81;
    m.coulomb_friction = Vec::Constant(2, 0.2);
    ControllerConfig cfg = cfg_2r();
    LogStep s;
    s.q = Vec(2);
    s.q << 0.3, -0.8;
    s.qdot = Vec(2);
    s.qdot << 1.0, -0.5;
    s.qddot_des = Vec(2);
    s.qddot_des << 2.0, 1.0;
    s.qdot_des = Vec(2);
    s.qdot_des << 0.9, -0.4;
    s.tau_load = Vec::Constant(2, 0.05);
    const Vec psi = disturbance_psi(m, cfg, s);
    const Vec expect = (mass_matrix(m, s.q) - cfg.M_n) * s.qddot_des +
                       coriolis_matrix(m, s.q, s.qdot) * s.qdot_des + gravity_vector(m, s.q) +
                       friction_torque(m, s.qdot) + s.tau_load;
    CHECK((psi - expect).norm() < 1e-15);
    CHECK(psi.norm() > 0.1);  // the example is not degenerate
}

TEST_CASE("Lyapunov candidate is the inertia-weighted half square") {
    ManipulatorModel m = planar_2r();
    Vec q(2), eD(2);
    q << 0.5, -1.0;
    eD << 0.3, -0.2;
    CHECK(lyapunov(m, eD, q) ==
          doctest::Approx(0.5 * eD.dot(mass_matrix(m, q) * eD)).epsilon(1e-14));
    CHECK(lyapunov(m, Vec::Zero(2), q) == 0.0);
    CHECK(lyapunov(m, eD, q) > 0.0);
}

TEST_CASE("analytic Lyapunov rate matches a finite difference of the logged V") {
    const RunLog log = circle_run(1.0);
    const double dt = 1e-4;
    double max_err = 0.0, scale = 1.0;
    for (std::size_t i = 1; i + 1 < log.steps.size(); ++i) {
        if (log.steps[i].t < 0.5) continue;  // skip the observer transient
        const double fd = (log.steps[i + 1].V - log.steps[i - 1].V) / (2.0 * dt);
        max_err = std::max(max_err, std::abs(fd - log.steps[i].Vdot));
        scale = std::max(scale, std::abs(log.steps[i].Vdot));
    }
    CHECK(max_err < 1e-3 * scale);
}

TEST_CASE("the margin is zero exactly at the ultimate bound") {
    BetaConstants b;
    b.beta_Mn_min = 0.01;
    b.beta_dM_max = 0.02;
    b.beta_C = 0.05;
    b.beta_g = 1.0;
    b.beta_fric_max = 0.3;
    b.beta_load_max = 0.7;
    const double g = 150.0;
    LogStep s;
    s.qddot_des = Vec::Constant(1, 3.0);
    s.qdot = Vec::Constant(1, 2.0);
    s.qdot_des = Vec::Constant(1, 2.0);
    const double gamma = ultimate_bound_gamma(b, g, 3.0, 2.0, 2.0);
    s.e_D = Vec::Constant(1, gamma);
    CHECK(std::abs(sufficient_condition_margin(b, g, s)) < 1e-12);
    s.e_D *= 1.5;
    CHECK(sufficient_condition_margin(b, g, s) > 0.0);
    s.e_D *= 0.1;
    CHECK(sufficient_condition_margin(b, g, s) < 0.0);
}

TEST_CASE("a positive margin certifies a negative Lyapunov rate") {
    // Synthetic state outside the ultimate-bound ball: regulation at rest
    // (qddot_des = qdot_des = 0) with a large dynamic error. The sufficient
    // condition is strictly positive and the analytic rate strictly negative,
    // exercising the implication in a non-vacuous way.
    ManipulatorModel m = planar_2r();
    ControllerConfig cfg = cfg_2r();
    const BetaConstants b = estimate_betas(m, cfg, box_2r());

    Eigen::SelfAdjointEigenSolver<Mat> es(cfg.M_n);
    LogStep s;
    s.q = Vec::Constant(2, 0.5);
    s.e_D = 3.0 * es.eigenvectors().col(0);  // worst-case direction for e_D^T M_n e_D
    s.qdot = s.e_D;                          // qdot_des = 0 so e_D = qdot
    s.qdot_des = Vec::Zero(2);
    s.qddot_des = Vec::Zero(2);
    s.tau_load = Vec::Zero(2);

    const double margin = sufficient_condition_margin(b, cfg.g_dob.minCoeff(), s);
    REQUIRE(margin > 0.0);
    CHECK(lyapunov_rate(m, cfg, s) < 0.0);

    // scaling the error up only strengthens both sides
    s.e_D *= 5.0;
    s.qdot = s.e_D;
    CHECK(sufficient_condition_margin(b, cfg.g_dob.minCoeff(), s) > margin);
    CHECK(lyapunov_rate(m, cfg, s) < 0.0);
}

TEST_CASE("passivity integral accumulates by the trapezoid rule") {
    RunLog log;
    log.n = 1;
    // constant e_D^T psi = -2: running integral is -2t, infimum at the end
    for (int k = 0; k <= 4; ++k) {
        LogStep s;
        s.t = 0.5 * k;
        s.e_D = Vec::Constant(1, 2.0);
        s.psi = Vec::Constant(1, -1.0);
        log.steps.push_back(s);
    }
    const PassivityReport rep = passivity_integral(log);
    REQUIRE(rep.running.size() == 5);
    CHECK(rep.running[0] == 0.0);
    CHECK(rep.running[4] == doctest::Approx(-4.0).epsilon(1e-14));
    CHECK(rep.infimum == doctest::Approx(-4.0).epsilon(1e-14));
    CHECK(rep.bounded_below);

    const PassivityReport empty = passivity_integral(RunLog{});
    CHECK(empty.infimum == 0.0);
    CHECK(empty.bounded_below);
}

TEST_CASE("run classification covers every verdict branch") {
    ClassifyTolerances tol;
    RunLog log;
    log.n = 1;
    for (int k = 0; k <= 100; ++k) {
        LogStep s;
        s.t = 0.1 * k;
        s.e = Vec::Constant(1, 1e-5);
        s.e_D = Vec::Constant(1, 1e-4);
        s.eD_norm = 1e-4;
        log.steps.push_back(s);
    }
    CHECK(classify_run(log, 1.0, 2.0, tol).verdict == Verdict::Converged);

    RunLog diverged = log;
    diverged.diverged_at = 5.0;
    CHECK(classify_run(diverged, 1.0, 2.0, tol).verdict == Verdict::Divergent);
    RunLog blown = log;
    blown.nonfinite = true;
    CHECK(classify_run(blown, 1.0, 2.0, tol).verdict == Verdict::Divergent);

    RunLog bounded = log;
    for (auto& s : bounded.steps) {
        s.e = Vec::Constant(1, 0.05);
        s.eD_norm = 0.5;
    }
    const Classification ok = classify_run(bounded, 1.0, 2.0, tol);
    CHECK(ok.verdict == Verdict::Bounded);
    CHECK_FALSE(ok.gamma_violated);
    const Classification bad = classify_run(bounded, 0.1, 2.0, tol);
    CHECK(bad.verdict == Verdict::Bounded);
    CHECK(bad.gamma_violated);
}
