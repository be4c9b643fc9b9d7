#pragma once

#include "dobsim/simulation.hpp"

namespace dobsim {

/// Dynamic error from the logged position error: e_D = edot + K_D e
/// + K_P int e dt, with the integral accumulated by the trapezoid rule from
/// t = 0. The state-based definition qdot - qdot_des lives in the RunLog;
/// the two agree (up to quadrature) on runs started on the reference.
std::vector<Vec> dynamic_error(const RunLog& log, const Vec& K_D, const Vec& K_P);

/// psi = dM(q) qddot_des + C(q, qdot) qdot_des + g(q) + tau_fric + tau_load.
Vec disturbance_psi(const ManipulatorModel& model, const ControllerConfig& cfg,
                    const LogStep& step);

/// V = 1/2 e_D^T M(q) e_D
double lyapunov(const ManipulatorModel& model, const Vec& e_D, const Vec& q);

/// Analytic rate after the skew-symmetry cancellation:
/// Vdot = -e_D^T G M_n e_D - e_D^T psi.
double lyapunov_rate(const ManipulatorModel& model, const ControllerConfig& cfg,
                     const LogStep& step);

/// g_dob beta_Mn_min ||e_D|| minus the disturbance bound evaluated at the
/// step's measured norms. Positive margin guarantees Vdot <= 0.
double sufficient_condition_margin(const BetaConstants& betas, double g_dob,
                                   const LogStep& step);

struct PassivityReport {
    std::vector<double> running;  // trapezoid integral of e_D^T psi
    double infimum = 0;
    bool bounded_below = true;    // whether the infimum is finite
};

PassivityReport passivity_integral(const RunLog& log);

struct ClassifyTolerances {
    double converged_e_tol = 1e-3;
    double converged_eD_tol = 1e-2;
};

struct Classification {
    Verdict verdict = Verdict::Bounded;
    bool gamma_violated = false;
};

/// Divergent if the run tripped the threshold or went non-finite; Converged
/// if both error norms settle below tolerance over the final window; Bounded
/// if the settled ||e_D|| stays within gamma; Bounded with gamma_violated
/// otherwise (theory falsification diagnostic).
Classification classify_run(const RunLog& log, double gamma, double settle_window_s,
                            const ClassifyTolerances& tol);

}  // namespace dobsim
