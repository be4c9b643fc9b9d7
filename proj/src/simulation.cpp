#include "dobsim/simulation.hpp"

#include "dobsim/analysis.hpp"

#include <cmath>
#include <random>

namespace dobsim {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Converged: return "converged";
        case Verdict::Divergent: return "divergent";
        default: return "bounded";
    }
}

RefSample reference_sample(const Reference& ref, double t) {
    RefSample s;
    switch (ref.kind) {
        case RefKind::StepRegulation: {
            s.q = t < ref.step_time ? ref.q_start : ref.q_target;
            s.qdot = Vec::Zero(s.q.size());
            s.qddot = Vec::Zero(s.q.size());
            return s;
        }
        case RefKind::SmoothedStep: {
            const int n = static_cast<int>(ref.q_target.size());
            if (t < ref.step_time) {
                s.q = ref.q_start;
                s.qdot = Vec::Zero(n);
                s.qddot = Vec::Zero(n);
                return s;
            }
            const double a = std::exp(-(t - ref.step_time) / ref.smoothing_tau);
            const Vec d = ref.q_start - ref.q_target;
            s.q = ref.q_target + a * d;
            s.qdot = -(a / ref.smoothing_tau) * d;
            s.qddot = (a / (ref.smoothing_tau * ref.smoothing_tau)) * d;
            return s;
        }
        case RefKind::JointCircle: {
            const double w = 2.0 * M_PI / ref.period;
            const double ph = w * t + ref.phase;
            s.q = ref.center + std::sin(ph) * ref.amplitude;
            s.qdot = (w * std::cos(ph)) * ref.amplitude;
            s.qddot = (-w * w * std::sin(ph)) * ref.amplitude;
            return s;
        }
        case RefKind::CustomSamples: {
            const std::size_t last = ref.qs.size() - 1;
            const double x = std::max(0.0, t / ref.sample_dt);
            const std::size_t i0 = std::min(static_cast<std::size_t>(x), last);
            const std::size_t i1 = std::min(i0 + 1, last);
            const double a = std::min(1.0, x - static_cast<double>(i0));
            s.q = (1 - a) * ref.qs[i0] + a * ref.qs[i1];
            s.qdot = (1 - a) * ref.qds[i0] + a * ref.qds[i1];
            s.qddot = (1 - a) * ref.qdds[i0] + a * ref.qdds[i1];
            return s;
        }
        case RefKind::OperationalCircle:
            throw ConfigurationError(
                "reference_sample: operational-circle must be converted with operational_to_joint");
    }
    throw ConfigurationError("reference_sample: unknown reference kind");
}

namespace {

Vec ik_2r(const ManipulatorModel& model, const Eigen::Vector2d& x, std::size_t sample_idx) {
    const double l1 = model.links[0].length, l2 = model.links[1].length;
    const double r2 = x.squaredNorm();
    double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if (c2 > 1.0 + 1e-9 || c2 < -1.0 - 1e-9)
        throw ConfigurationError("operational_to_joint: sample " + std::to_string(sample_idx) +
                                 " is outside the reachable annulus");
    c2 = std::clamp(c2, -1.0, 1.0);
    // elbow-down branch
    const double q2 = -std::acos(c2);
    const double q1 =
        std::atan2(x.y(), x.x()) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
    Vec q(2);
    q << q1, q2;
    return q;
}

Vec ik_dls(const ManipulatorModel& model, const Eigen::Vector2d& x, Vec q,
           std::size_t sample_idx) {
    constexpr double damping = 1e-3;
    constexpr int max_iter = 200;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::Vector2d err = x - tip_position(model, q);
        if (err.norm() < 1e-12) return q;
        const Mat J = tip_jacobian(model, q);
        const Mat JJt = J * J.transpose() + damping * damping * Mat::Identity(2, 2);
        q += J.transpose() * JJt.ldlt().solve(err);
    }
    if ((x - tip_position(model, q)).norm() > 1e-9)
        throw ConfigurationError("operational_to_joint: IK did not converge at sample " +
                                 std::to_string(sample_idx));
    return q;
}

}  // namespace

Reference operational_to_joint(const ManipulatorModel& model, const Eigen::Vector2d& center,
                               double radius, double period, double duration, double sample_dt) {
    if (!(sample_dt > 0.0) || !(duration > 0.0) || !(period > 0.0))
        throw ConfigurationError("operational_to_joint: period, duration, sample_dt must be > 0");
    const int n = model.dof();
    double reach = 0.0;
    for (const auto& l : model.links) reach += l.length;

    Reference ref;
    ref.kind = RefKind::CustomSamples;
    ref.sample_dt = sample_dt;
    const std::size_t count = static_cast<std::size_t>(std::ceil(duration / sample_dt)) + 3;
    const double w = 2.0 * M_PI / period;

    Vec q_prev(n);
    if (n == 3) q_prev << M_PI / 4, -M_PI / 3, M_PI / 3;  // deterministic IK seed
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) * sample_dt;
        const Eigen::Vector2d x =
            center + radius * Eigen::Vector2d(std::cos(w * t), std::sin(w * t));
        if (x.norm() > reach - 1e-12)
            throw ConfigurationError("operational_to_joint: sample " + std::to_string(i) +
                                     " lies outside the arm's reach");
        if (x.norm() > 0.999 * reach) ref.near_singular = true;

        Vec q = n == 2 ? ik_2r(model, x, i) : ik_dls(model, x, q_prev, i);
        ref.qs.push_back(q);
        q_prev = q;
    }

    // central differences, one-sided at the ends
    const auto& qs = ref.qs;
    const double h = sample_dt;
    ref.qds.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (i == 0)
            ref.qds[i] = (qs[1] - qs[0]) / h;
        else if (i + 1 == count)
            ref.qds[i] = (qs[i] - qs[i - 1]) / h;
        else
            ref.qds[i] = (qs[i + 1] - qs[i - 1]) / (2.0 * h);
    }
    std::vector<Vec> raw(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (i == 0 || i + 1 == count)
            raw[i] = Vec::Zero(n);
        else
            raw[i] = (qs[i + 1] - 2.0 * qs[i] + qs[i - 1]) / (h * h);
    }
    raw[0] = raw[1];
    raw[count - 1] = raw[count - 2];
    // light 3-point smoothing of the second differences
    ref.qdds.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec& a = raw[i == 0 ? 0 : i - 1];
        const Vec& b = raw[i];
        const Vec& c = raw[i + 1 == count ? count - 1 : i + 1];
        ref.qdds[i] = 0.25 * a + 0.5 * b + 0.25 * c;
    }
    return ref;
}

Vec DisturbanceSchedule::load_at(double t, int n) const {
    Vec load = Vec::Zero(n);
    for (const auto& [time, value] : load_steps) {
        if (t + 1e-15 >= time) load = value;
        else break;
    }
    return load;
}

void DisturbanceSchedule::validate(int n) const {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& [time, value] : load_steps) {
        if (value.size() != n)
            throw std::invalid_argument("DisturbanceSchedule: tau_load dimension mismatch");
        if (time < prev)
            throw std::invalid_argument("DisturbanceSchedule: load_steps must be time-sorted");
        if (value.norm() > declared_load_bound + 1e-12)
            throw std::invalid_argument(
                "DisturbanceSchedule: scheduled load exceeds declared_load_bound");
        prev = time;
    }
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
    if (!(duration > dt)) throw std::invalid_argument("SimConfig: duration must exceed dt");
    if (!(divergence_threshold > 0.0))
        throw std::invalid_argument("SimConfig: divergence_threshold must be > 0");
    if (log_decimation < 1) throw std::invalid_argument("SimConfig: log_decimation must be >= 1");
    if (noise_enabled && controller_mode != ControllerMode::Sampled)
        throw std::invalid_argument(
            "SimConfig: measurement noise requires the sampled controller mode");
    if (noise_enabled && !(noise_amplitude > 0.0))
        throw std::invalid_argument("SimConfig: noise enabled with zero amplitude");
}

Vec integrator_step(const std::function<Vec(double, const Vec&)>& rhs, double t, const Vec& y,
                    double dt, Integrator scheme) {
    if (scheme == Integrator::Euler) return y + dt * rhs(t, y);
    const Vec k1 = rhs(t, y);
    const Vec k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
    const Vec k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
    const Vec k4 = rhs(t + dt, y + dt * k3);
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

struct StepLogger {
    const ManipulatorModel& model;
    const ControllerConfig& cfg;
    const BetaConstants& betas;
    double g_min;
    RunLog& log;
    double passivity_acc = 0.0;
    bool have_prev = false;
    double prev_t = 0.0, prev_integrand = 0.0;

    void push(double t, const Vec& q, const Vec& qd, const RefSample& ref, const Vec& qdot_des,
              const ControllerOutput& out, const Vec& tau_load) {
        LogStep s;
        s.t = t;
        s.q = q;
        s.qdot = qd;
        s.e = q - ref.q;
        s.edot = qd - ref.qdot;
        s.qdot_des = qdot_des;
        s.qddot_des = out.qddot_des;
        s.e_D = qd - qdot_des;
        s.eD_norm = s.e_D.norm();
        s.tau = out.tau;
        s.tau_des = out.tau_des;
        s.tau_dis_hat = out.tau_dis_hat;
        s.tau_load = tau_load;
        s.psi = disturbance_psi(model, cfg, s);
        s.V = lyapunov(model, s.e_D, q);
        s.Vdot = -s.e_D.dot(cfg.g_dob.asDiagonal() * (cfg.M_n * s.e_D)) - s.e_D.dot(s.psi);

        const Vec qdd = forward_dynamics(model, {q, qd}, out.tau, tau_load);
        const Vec eDdot = qdd - out.qddot_des;
        s.error_dynamics_residual = (mass_matrix(model, q) * eDdot +
                           coriolis_matrix(model, q, qd) * s.e_D +
                           cfg.g_dob.asDiagonal() * (cfg.M_n * s.e_D) + s.psi)
                              .norm();
        s.margin = sufficient_condition_margin(betas, g_min, s);

        const double integrand = s.e_D.dot(s.psi);
        if (have_prev) passivity_acc += 0.5 * (t - prev_t) * (integrand + prev_integrand);
        prev_t = t;
        prev_integrand = integrand;
        have_prev = true;
        s.passivity = passivity_acc;

        log.sup_qddot_des = std::max(log.sup_qddot_des, out.qddot_des.norm());
        log.sup_qdot = std::max(log.sup_qdot, qd.norm());
        log.sup_qdot_des = std::max(log.sup_qdot_des, qdot_des.norm());
        log.sup_eD = std::max(log.sup_eD, s.eD_norm);
        log.max_error_dynamics_residual = std::max(log.max_error_dynamics_residual, s.error_dynamics_residual);
        log.max_psi_norm = std::max(log.max_psi_norm, s.psi.norm());
        if (out.saturated) log.saturated = true;

        log.steps.push_back(std::move(s));
    }
};

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

RunLog run_scenario(const ManipulatorModel& model, const ControllerConfig& cfg,
                    const Reference& ref, const DisturbanceSchedule& dist, const SimConfig& sim,
                    const AnalysisConfig& analysis) {
    model.validate();
    cfg.validate();
    sim.validate();
    const int n = model.dof();
    if (cfg.dof() != n)
        throw ConfigurationError("run_scenario: controller/model dimension mismatch");
    dist.validate(n);
    if (ref.kind == RefKind::OperationalCircle)
        throw ConfigurationError("run_scenario: convert operational-circle first");

    const WorkspaceBox box = analysis.box ? *analysis.box : WorkspaceBox::full_revolution(n, 20.0);
    RunLog log;
    log.n = n;
    log.betas = estimate_betas(model, cfg, box, dist.declared_load_bound);
    const double g_min = cfg.g_dob.minCoeff();

    StepLogger logger{model, cfg, log.betas, g_min, log};

    const RefSample ref0 = reference_sample(ref, 0.0);
    Vec q = ref0.q;
    Vec qd = Vec::Zero(n);
    if (sim.start_on_reference) {
        qd = ref0.qdot;
    } else {
        if (sim.initial_error.size() == n) q += sim.initial_error;
        if (sim.initial_qdot.size() == n) qd = sim.initial_qdot;
    }
    DObState dob = dob_init(cfg, q, qd, Vec::Zero(n));
    Vec qdot_des = qd;

    const long total = std::lround(sim.duration / sim.dt);

    auto check_divergence = [&](double t, const Vec& q_now, const Vec& qd_now) {
        if (!finite(q_now) || !finite(qd_now)) {
            log.nonfinite = true;
            log.diverged_at = t;
            return true;
        }
        const Vec e = q_now - reference_sample(ref, t).q;
        if (e.norm() > sim.divergence_threshold) {
            log.diverged_at = t;
            return true;
        }
        return false;
    };

    if (sim.controller_mode == ControllerMode::Continuous) {
        // state vector: [q, qd, w, qdot_des, q_lp]
        Vec y(5 * n);
        y << q, qd, dob.w, qdot_des, q;

        auto eval_control = [&](double t, const Vec& state) {
            const auto qv = state.segment(0, n);
            const auto qdv = state.segment(n, n);
            const auto wv = state.segment(2 * n, n);
            const auto qlpv = state.segment(4 * n, n);
            const RefSample r = reference_sample(ref, t);
            ControllerOutput out;
            out.qdot_est = cfg.g_v > 0.0 ? Vec(cfg.g_v * (qv - qlpv)) : Vec(qdv);
            out.qddot_des = desired_acceleration(cfg, qv, out.qdot_est, r);
            out.tau_des = desired_torque(cfg, out.qddot_des);
            out.tau_dis_hat = wv - cfg.g_dob.asDiagonal() * (cfg.M_n * out.qdot_est);
            out.tau = out.tau_des + out.tau_dis_hat;
            if (cfg.tau_sat > 0.0) {
                for (int i = 0; i < n; ++i)
                    if (std::abs(out.tau[i]) > cfg.tau_sat) {
                        out.tau[i] = std::copysign(cfg.tau_sat, out.tau[i]);
                        out.saturated = true;
                    }
            }
            return std::pair<ControllerOutput, RefSample>{std::move(out), std::move(r)};
        };

        auto rhs = [&](double t, const Vec& state) -> Vec {
            const auto qv = state.segment(0, n);
            const auto qdv = state.segment(n, n);
            const auto qlpv = state.segment(4 * n, n);
            auto [out, r] = eval_control(t, state);
            const Vec qdd =
                forward_dynamics(model, {Vec(qv), Vec(qdv)}, out.tau, dist.load_at(t, n));
            Vec dy(5 * n);
            dy.segment(0, n) = qdv;
            dy.segment(n, n) = qdd;
            dy.segment(2 * n, n) = cfg.g_dob.asDiagonal() * out.tau_des;
            dy.segment(3 * n, n) = out.qddot_des;
            dy.segment(4 * n, n) = cfg.g_v > 0.0 ? Vec(cfg.g_v * (qv - qlpv)) : Vec::Zero(n);
            return dy;
        };

        for (long k = 0; k <= total; ++k) {
            const double t = static_cast<double>(k) * sim.dt;
            const Vec q_now = y.segment(0, n);
            const Vec qd_now = y.segment(n, n);
            const bool diverged = check_divergence(t, q_now, qd_now);
            if (diverged || k % sim.log_decimation == 0 || k == total) {
                if (finite(y)) {
                    auto [out, r] = eval_control(t, y);
                    logger.push(t, q_now, qd_now, r, y.segment(3 * n, n), out,
                                dist.load_at(t, n));
                }
            }
            if (diverged || k == total) break;
            y = integrator_step(rhs, t, y, sim.dt, sim.integrator);
        }
    } else {
        std::mt19937_64 rng(sim.noise_seed);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);

        for (long k = 0; k <= total; ++k) {
            const double t = static_cast<double>(k) * sim.dt;
            const bool diverged = check_divergence(t, q, qd);
            const RefSample r = reference_sample(ref, t);
            Vec q_meas = q;
            if (sim.noise_enabled)
                for (int i = 0; i < n; ++i) q_meas[i] += sim.noise_amplitude * uni(rng);

            auto [out, dob_next] = control_torque(cfg, dob, q_meas, qd, r, sim.dt);
            if (diverged || k % sim.log_decimation == 0 || k == total) {
                if (finite(q) && finite(qd))
                    logger.push(t, q, qd, r, qdot_des, out, dist.load_at(t, n));
            }
            if (diverged || k == total) break;

            // zero-order hold: torque and load fixed over the step
            const Vec tau_load = dist.load_at(t, n);
            auto plant_rhs = [&](double, const Vec& state) -> Vec {
                Vec dy(2 * n);
                dy.segment(0, n) = state.segment(n, n);
                dy.segment(n, n) = forward_dynamics(
                    model, {Vec(state.segment(0, n)), Vec(state.segment(n, n))}, out.tau,
                    tau_load);
                return dy;
            };
            Vec y(2 * n);
            y << q, qd;
            y = integrator_step(plant_rhs, t, y, sim.dt, sim.integrator);
            q = y.segment(0, n);
            qd = y.segment(n, n);
            dob = dob_next;
            qdot_des += sim.dt * out.qddot_des;
        }
    }

    // post-run statistics and classification
    log.settle_start = sim.duration * (1.0 - analysis.settle_fraction);
    for (const auto& s : log.steps) {
        if (s.t < log.settle_start) continue;
        log.settled_max_e = std::max(log.settled_max_e, s.e.norm());
        log.settled_max_eD = std::max(log.settled_max_eD, s.eD_norm);
    }
    log.passivity_infimum = 0.0;
    for (const auto& s : log.steps) log.passivity_infimum = std::min(log.passivity_infimum, s.passivity);

    if (g_min > 0.0 && log.betas.beta_Mn_min > 0.0)
        log.gamma_post = ultimate_bound_gamma(log.betas, g_min, log.sup_qddot_des, log.sup_qdot,
                                              log.sup_qdot_des);
    else
        log.gamma_post = std::numeric_limits<double>::infinity();

    ClassifyTolerances tol{analysis.converged_e_tol, analysis.converged_eD_tol};
    const Classification cls =
        classify_run(log, log.gamma_post, sim.duration * analysis.settle_fraction, tol);
    log.verdict = cls.verdict;
    log.gamma_violated = cls.gamma_violated;
    return log;
}

}  // namespace dobsim
