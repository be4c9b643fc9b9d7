#include "dobsim/analysis.hpp"

#include <cmath>

namespace dobsim {

std::vector<Vec> dynamic_error(const RunLog& log, const Vec& K_D, const Vec& K_P) {
    std::vector<Vec> out;
    out.reserve(log.steps.size());
    Vec integral = Vec::Zero(log.n);
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        if (i > 0) {
            const double h = log.steps[i].t - log.steps[i - 1].t;
            integral += 0.5 * h * (log.steps[i].e + log.steps[i - 1].e);
        }
        out.push_back(log.steps[i].edot + K_D.cwiseProduct(log.steps[i].e) +
                      K_P.cwiseProduct(integral));
    }
    return out;
}

Vec disturbance_psi(const ManipulatorModel& model, const ControllerConfig& cfg,
                    const LogStep& step) {
    const Mat dM = mass_matrix(model, step.q) - cfg.M_n;
    return dM * step.qddot_des +
           coriolis_matrix(model, step.q, step.qdot) * step.qdot_des +
           gravity_vector(model, step.q) + friction_torque(model, step.qdot) + step.tau_load;
}

double lyapunov(const ManipulatorModel& model, const Vec& e_D, const Vec& q) {
    return 0.5 * e_D.dot(mass_matrix(model, q) * e_D);
}

double lyapunov_rate(const ManipulatorModel& model, const ControllerConfig& cfg,
                     const LogStep& step) {
    const Vec psi = disturbance_psi(model, cfg, step);
    return -step.e_D.dot(cfg.g_dob.asDiagonal() * (cfg.M_n * step.e_D)) - step.e_D.dot(psi);
}

double sufficient_condition_margin(const BetaConstants& betas, double g_dob,
                                   const LogStep& step) {
    const double bound = betas.beta_dM_max * step.qddot_des.norm() +
                         betas.beta_C * step.qdot.norm() * step.qdot_des.norm() +
                         betas.beta_g + betas.beta_fric_max + betas.beta_load_max;
    return g_dob * betas.beta_Mn_min * step.e_D.norm() - bound;
}

PassivityReport passivity_integral(const RunLog& log) {
    PassivityReport rep;
    rep.running.reserve(log.steps.size());
    double acc = 0.0;
    double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        if (i > 0) {
            const double h = log.steps[i].t - log.steps[i - 1].t;
            acc += 0.5 * h *
                   (log.steps[i].e_D.dot(log.steps[i].psi) +
                    log.steps[i - 1].e_D.dot(log.steps[i - 1].psi));
        }
        rep.running.push_back(acc);
        inf = std::min(inf, acc);
    }
    rep.infimum = log.steps.empty() ? 0.0 : inf;
    rep.bounded_below = std::isfinite(rep.infimum);
    return rep;
}

Classification classify_run(const RunLog& log, double gamma, double settle_window_s,
                            const ClassifyTolerances& tol) {
    Classification c;
    if (log.nonfinite || log.diverged_at >= 0.0) {
        c.verdict = Verdict::Divergent;
        return c;
    }
    if (log.steps.empty()) {
        c.verdict = Verdict::Bounded;
        return c;
    }
    const double t_end = log.steps.back().t;
    const double t_settle = t_end - settle_window_s;
    double max_e = 0.0, max_eD = 0.0;
    for (const auto& s : log.steps) {
        if (s.t < t_settle) continue;
        max_e = std::max(max_e, s.e.norm());
        max_eD = std::max(max_eD, s.eD_norm);
    }
    if (max_e < tol.converged_e_tol && max_eD < tol.converged_eD_tol) {
        c.verdict = Verdict::Converged;
        return c;
    }
    c.verdict = Verdict::Bounded;
    c.gamma_violated = max_eD > gamma;
    return c;
}

}  // namespace dobsim
