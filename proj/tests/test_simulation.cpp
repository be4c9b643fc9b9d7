#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dobsim/simulation.hpp"

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

ManipulatorModel table1() {
    ManipulatorModel m;
    m.links = {{0.06, 0.67, 0.03, 624e-7}, {0.06, 0.67, 0.03, 624e-7}, {0.06, 0.62, 0.03, 622e-7}};
    m.gravity_accel = 0;
    m.viscous_friction = Vec::Constant(3, 0.01);
    m.coulomb_friction = Vec::Zero(3);
    return m;
}

// tight nominal-inertia upper bound used by the shipped scenarios
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

AnalysisConfig fast_analysis(int n) {
    AnalysisConfig a;
    WorkspaceBox box = WorkspaceBox::full_revolution(n, 5.0, 5);
    a.box = box;
    return a;
}

Reference circle_ref_2r(double dt) {
    ManipulatorModel m = planar_2r();
    return operational_to_joint(m, {0.06, 0.0}, 0.03, 2.0, 1.0, dt / 2.0);
}

}  // namespace

TEST_CASE("step reference switches at the step time with zero derivatives") {
    Reference ref;
    ref.kind = RefKind::StepRegulation;
    ref.q_start = Vec::Constant(2, 0.1);
    ref.q_target = Vec::Constant(2, 0.5);
    ref.step_time = 1.0;
    CHECK((reference_sample(ref, 0.999).q - ref.q_start).norm() == 0.0);
    CHECK((reference_sample(ref, 1.0).q - ref.q_target).norm() == 0.0);
    CHECK(reference_sample(ref, 5.0).qdot.norm() == 0.0);
    CHECK(reference_sample(ref, 5.0).qddot.norm() == 0.0);
}

TEST_CASE("smoothed step is continuous and derivative-consistent") {
    Reference ref;
    ref.kind = RefKind::SmoothedStep;
    ref.q_start = Vec::Constant(3, 0.3);
    ref.q_target = Vec::Constant(3, 0.8);
    ref.step_time = 0.25;
    ref.smoothing_tau = 0.05;

    CHECK((reference_sample(ref, 0.25).q - ref.q_start).norm() < 1e-15);
    CHECK((reference_sample(ref, 5.0).q - ref.q_target).norm() < 1e-15);

    const double h = 1e-6;
    for (double t : {0.3, 0.5, 1.0}) {
        const RefSample s = reference_sample(ref, t);
        const Vec dq = (reference_sample(ref, t + h).q - reference_sample(ref, t - h).q) / (2 * h);
        const Vec ddq =
            (reference_sample(ref, t + h).qdot - reference_sample(ref, t - h).qdot) / (2 * h);
        CHECK((s.qdot - dq).norm() < 1e-6);
        CHECK((s.qddot - ddq).norm() < 1e-4);
    }
}

TEST_CASE("joint circle matches its analytic derivatives") {
    Reference ref;
    ref.kind = RefKind::JointCircle;
    ref.center = Vec::Constant(3, 0.6);
    ref.amplitude = Vec::Constant(3, 0.15);
    ref.period = 2.0;
    ref.phase = 0.4;
    const double w = M_PI;
    for (double t : {0.0, 0.37, 1.2}) {
        const RefSample s = reference_sample(ref, t);
        const double ph = w * t + 0.4;
        CHECK(s.q[0] == doctest::Approx(0.6 + 0.15 * std::sin(ph)).epsilon(1e-14));
        CHECK(s.qdot[1] == doctest::Approx(0.15 * w * std::cos(ph)).epsilon(1e-14));
        CHECK(s.qddot[2] == doctest::Approx(-0.15 * w * w * std::sin(ph)).epsilon(1e-14));
    }
}

TEST_CASE("custom samples interpolate linearly and clamp at the end") {
    Reference ref;
    ref.kind = RefKind::CustomSamples;
    ref.sample_dt = 0.1;
    for (double v : {0.0, 1.0, 4.0}) {
        ref.qs.push_back(Vec::Constant(2, v));
        ref.qds.push_back(Vec::Constant(2, 10.0 * v));
        ref.qdds.push_back(Vec::Constant(2, -v));
    }
    CHECK(reference_sample(ref, 0.05).q[0] == doctest::Approx(0.5));
    CHECK(reference_sample(ref, 0.15).q[0] == doctest::Approx(2.5));
    CHECK(reference_sample(ref, 0.15).qdot[0] == doctest::Approx(25.0));
    CHECK(reference_sample(ref, 9.0).q[0] == doctest::Approx(4.0));  // clamped
}

TEST_CASE("an unconverted operational circle cannot be sampled") {
    Reference ref;
    ref.kind = RefKind::OperationalCircle;
    CHECK_THROWS_AS(reference_sample(ref, 0.0), ConfigurationError);
}

TEST_CASE("integrator accuracy on the scalar exponential") {
    auto rhs = [](double, const Vec& y) { return Vec(-y); };
    const Vec y0 = Vec::Constant(1, 1.0);

    const double dt = 0.01;
    const Vec rk = integrator_step(rhs, 0.0, y0, dt, Integrator::RK4);
    CHECK(std::abs(rk[0] - std::exp(-dt)) < 1e-11);  // local error O(dt^5)
    const Vec eu = integrator_step(rhs, 0.0, y0, dt, Integrator::Euler);
    CHECK(std::abs(eu[0] - std::exp(-dt)) < 6e-5);   // local error O(dt^2)

    // global error shrinks ~16x under step halving for RK4
    auto integrate = [&](double step, Integrator scheme) {
        Vec y = y0;
        const long n = std::lround(1.0 / step);
        for (long i = 0; i < n; ++i) y = integrator_step(rhs, i * step, y, step, scheme);
        return std::abs(y[0] - std::exp(-1.0));
    };
    const double r_rk = integrate(1e-2, Integrator::RK4) / integrate(5e-3, Integrator::RK4);
    CHECK(r_rk == doctest::Approx(16.0).epsilon(0.15));
    const double r_eu = integrate(1e-3, Integrator::Euler) / integrate(5e-4, Integrator::Euler);
    CHECK(r_eu == doctest::Approx(2.0).epsilon(0.05));

    // a zero field leaves the state untouched
    auto zero = [](double, const Vec& y) { return Vec(Vec::Zero(y.size())); };
    CHECK(integrator_step(zero, 0.0, y0, 0.1, Integrator::RK4)[0] == 1.0);
}

TEST_CASE("operational circle converts to consistent joint samples") {
    ManipulatorModel m2 = planar_2r();
    Reference ref = operational_to_joint(m2, {0.06, 0.0}, 0.03, 2.0, 2.0, 1e-3);
    CHECK_FALSE(ref.near_singular);
    const double w = M_PI;
    for (std::size_t i = 0; i < ref.qs.size(); i += 37) {
        const double t = static_cast<double>(i) * ref.sample_dt;
        const Eigen::Vector2d target =
            Eigen::Vector2d(0.06 + 0.03 * std::cos(w * t), 0.03 * std::sin(w * t));
        CHECK((tip_position(m2, ref.qs[i]) - target).norm() < 1e-9);
    }
    // velocity samples agree with central differences of the position samples
    for (std::size_t i = 1; i + 1 < ref.qs.size(); i += 53) {
        const Vec fd = (ref.qs[i + 1] - ref.qs[i - 1]) / (2.0 * ref.sample_dt);
        CHECK((ref.qds[i] - fd).norm() < 1e-12);
    }

    ManipulatorModel m3 = table1();
    Reference ref3 = operational_to_joint(m3, {0.09, 0.02}, 0.05, 2.0, 0.5, 1e-3);
    for (std::size_t i = 0; i < ref3.qs.size(); i += 29) {
        const double t = static_cast<double>(i) * ref3.sample_dt;
        const Eigen::Vector2d target =
            Eigen::Vector2d(0.09 + 0.05 * std::cos(w * t), 0.02 + 0.05 * std::sin(w * t));
        CHECK((tip_position(m3, ref3.qs[i]) - target).norm() < 1e-6);
    }

    // zero radius: every sample is the same configuration
    Reference fixed = operational_to_joint(m2, {0.08, 0.01}, 0.0, 2.0, 0.1, 1e-3);
    for (const Vec& q : fixed.qs) CHECK((q - fixed.qs[0]).norm() < 1e-12);

    // a circle grazing the reach boundary raises the near-singular flag
    Reference grazing = operational_to_joint(m2, {0.1195, 0.0}, 4e-4, 2.0, 0.1, 1e-3);
    CHECK(grazing.near_singular);

    // an unreachable circle names the offending sample
    CHECK_THROWS_AS(operational_to_joint(m2, {0.10, 0.0}, 0.03, 2.0, 2.0, 1e-3),
                    ConfigurationError);
}

TEST_CASE("disturbance schedule lookup and validation") {
    DisturbanceSchedule d;
    d.load_steps = {{1.0, Vec::Constant(2, 0.1)}, {2.0, Vec::Constant(2, 0.3)}};
    d.declared_load_bound = 0.5;
    CHECK_NOTHROW(d.validate(2));
    CHECK(d.load_at(0.5, 2).norm() == 0.0);
    CHECK(d.load_at(1.0, 2)[0] == doctest::Approx(0.1));
    CHECK(d.load_at(1.5, 2)[0] == doctest::Approx(0.1));
    CHECK(d.load_at(3.0, 2)[1] == doctest::Approx(0.3));

    DisturbanceSchedule bad = d;
    std::swap(bad.load_steps[0], bad.load_steps[1]);
    CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);
    bad = d;
    bad.declared_load_bound = 0.1;  // 0.3 * sqrt(2) exceeds it
    CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);
    bad = d;
    CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
}

TEST_CASE("simulation config validation") {
    SimConfig s;
    s.duration = 1.0;
    CHECK_NOTHROW(s.validate());
    s.noise_enabled = true;
    s.noise_amplitude = 1e-4;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // noise needs sampled mode
    s.controller_mode = ControllerMode::Sampled;
    CHECK_NOTHROW(s.validate());
    s.noise_amplitude = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SimConfig{};
    s.duration = 1.0;
    s.dt = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("a system starting at an equilibrium reference stays there") {
    ManipulatorModel m = planar_2r();
    Reference ref;
    ref.kind = RefKind::StepRegulation;
    ref.q_start = Vec::Constant(2, 0.4);
    ref.q_target = ref.q_start;
    SimConfig sim;
    sim.dt = 1e-3;
    sim.duration = 0.5;
    const RunLog log = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2));
    CHECK(log.verdict == Verdict::Converged);
    for (const auto& s : log.steps) {
        CHECK(s.e.norm() < 1e-12);
        CHECK(s.eD_norm < 1e-12);
    }
}

TEST_CASE("runs are bitwise deterministic, including seeded noise") {
    ManipulatorModel m = planar_2r();
    Reference ref;
    ref.kind = RefKind::SmoothedStep;
    ref.q_start = Vec::Constant(2, 0.3);
    ref.q_target = Vec::Constant(2, 0.7);
    ref.step_time = 0.05;
    ref.smoothing_tau = 0.05;
    SimConfig sim;
    sim.dt = 1e-4;
    sim.duration = 0.3;
    sim.controller_mode = ControllerMode::Sampled;
    sim.noise_enabled = true;
    sim.noise_amplitude = 5e-5;
    sim.noise_seed = 1234;
    ControllerConfig cfg = cfg_2r();
    cfg.g_v = 1000.0;
    const RunLog a = run_scenario(m, cfg, ref, {}, sim, fast_analysis(2));
    const RunLog b = run_scenario(m, cfg, ref, {}, sim, fast_analysis(2));
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK((a.steps[i].q - b.steps[i].q).norm() == 0.0);
        CHECK((a.steps[i].tau - b.steps[i].tau).norm() == 0.0);
        CHECK(a.steps[i].V == b.steps[i].V);
    }
}

TEST_CASE("verdicts are stable under step halving") {
    ManipulatorModel m = planar_2r();
    Reference ref;
    ref.kind = RefKind::SmoothedStep;
    ref.q_start = Vec::Constant(2, 0.3);
    ref.q_target = Vec::Constant(2, 0.7);
    ref.step_time = 0.1;
    ref.smoothing_tau = 0.05;
    SimConfig sim;
    sim.dt = 1e-3;
    sim.duration = 2.0;
    const Verdict v1 = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2)).verdict;
    sim.dt = 5e-4;
    const Verdict v2 = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2)).verdict;
    CHECK(v1 == v2);
    CHECK(v1 == Verdict::Converged);
}

TEST_CASE("sampled and continuous controller modes agree for small steps") {
    ManipulatorModel m = planar_2r();
    Reference ref = circle_ref_2r(1e-4);
    SimConfig sim;
    sim.dt = 1e-4;
    sim.duration = 1.0;
    sim.start_on_reference = true;
    const RunLog cont = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2));
    sim.controller_mode = ControllerMode::Sampled;
    const RunLog samp = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2));
    REQUIRE(cont.steps.size() == samp.steps.size());
    double dev = 0.0;
    for (std::size_t i = 0; i < cont.steps.size(); ++i)
        dev = std::max(dev, (cont.steps[i].q - samp.steps[i].q).norm());
    CHECK(dev < 2e-3);
}

TEST_CASE("crossing the divergence threshold ends the run with a partial log") {
    ManipulatorModel m = planar_2r();
    Reference ref;
    ref.kind = RefKind::StepRegulation;
    ref.q_start = Vec::Constant(2, 0.0);
    ref.q_target = Vec::Constant(2, 0.6);  // instant error 0.6*sqrt(2) > threshold
    ref.step_time = 0.5;
    SimConfig sim;
    sim.dt = 1e-3;
    sim.duration = 2.0;
    sim.divergence_threshold = 0.5;
    const RunLog log = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2));
    CHECK(log.verdict == Verdict::Divergent);
    CHECK(log.diverged_at == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(log.steps.back().t <= 0.5 + 1e-12);
}

TEST_CASE("start_on_reference adopts the reference state at t = 0") {
    ManipulatorModel m = planar_2r();
    Reference ref;
    ref.kind = RefKind::JointCircle;
    ref.center = Vec::Constant(2, 0.5);
    ref.amplitude = Vec::Constant(2, 0.1);
    ref.period = 2.0;
    ref.phase = 0.7;
    SimConfig sim;
    sim.dt = 1e-3;
    sim.duration = 0.1;
    sim.start_on_reference = true;
    const RunLog log = run_scenario(m, cfg_2r(), ref, {}, sim, fast_analysis(2));
    const RefSample r0 = reference_sample(ref, 0.0);
    CHECK((log.steps.front().q - r0.q).norm() < 1e-15);
    CHECK((log.steps.front().qdot - r0.qdot).norm() < 1e-15);
}
