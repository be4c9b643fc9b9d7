#pragma once

#include "dobsim/bounds.hpp"
#include "dobsim/controller.hpp"
#include "dobsim/dynamics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dobsim {

struct ConfigurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RefKind { StepRegulation, SmoothedStep, JointCircle, OperationalCircle, CustomSamples };

/// Reference trajectory generator. OperationalCircle is a loader-level kind;
/// it is converted to CustomSamples by operational_to_joint before a run.
struct Reference {
    RefKind kind = RefKind::StepRegulation;

    // step kinds
    Vec q_start;
    Vec q_target;
    double step_time = 0.0;      // s
    double smoothing_tau = 0.02; // s, first-order lag of the smoothed step

    // joint-circle: q_ref = center + amplitude * sin(2 pi t / period + phase)
    Vec center;
    Vec amplitude;
    double period = 1.0;  // s
    double phase = 0.0;   // rad

    // operational-circle (pre-conversion)
    Eigen::Vector2d op_center{0, 0};  // m
    double op_radius = 0.0;           // m

    // custom samples on a uniform time grid starting at t = 0
    double sample_dt = 0.0;
    std::vector<Vec> qs, qds, qdds;
    bool near_singular = false;  // set by operational_to_joint near the reach boundary
};

RefSample reference_sample(const Reference& ref, double t);

/// Converts an operational-space circle to a joint-space CustomSamples
/// reference: analytic elbow-down inverse kinematics for n = 2, damped
/// least-squares differential IK for n = 3, then smoothed numerical
/// differentiation for the velocity/acceleration samples.
/// Throws ConfigurationError naming the first unreachable sample.
Reference operational_to_joint(const ManipulatorModel& model, const Eigen::Vector2d& center,
                               double radius, double period, double duration, double sample_dt);

struct DisturbanceSchedule {
    std::vector<std::pair<double, Vec>> load_steps;  // (time s, tau_load N m), time-sorted
    double declared_load_bound = 0.0;                // N m

    Vec load_at(double t, int n) const;
    void validate(int n) const;
};

enum class Integrator { RK4, Euler };
enum class ControllerMode { Continuous, Sampled };

struct SimConfig {
    double dt = 1e-3;      // s
    double duration = 10;  // s
    Integrator integrator = Integrator::RK4;
    double divergence_threshold = 10.0;  // rad, on ||e||_2
    int log_decimation = 1;
    ControllerMode controller_mode = ControllerMode::Continuous;

    Vec initial_error;            // rad; q(0) = q_ref(0) + initial_error
    Vec initial_qdot;             // rad/s
    bool start_on_reference = false;  // q(0) = q_ref(0), qdot(0) = qdot_ref(0)

    bool noise_enabled = false;   // uniform additive noise on q before filtering
    double noise_amplitude = 0.0; // rad
    std::uint64_t noise_seed = 0;

    void validate() const;
};

struct DeclaredSups {
    double qddot_des = 0;  // rad/s^2
    double qdot = 0;       // rad/s
    double qdot_des = 0;   // rad/s
};

struct AnalysisConfig {
    double settle_fraction = 0.2;     // final fraction of the horizon
    double converged_e_tol = 1e-3;    // rad
    double converged_eD_tol = 1e-2;
    std::optional<WorkspaceBox> box;  // default: [-pi, pi]^n, qdot_max 20 rad/s
    std::optional<DeclaredSups> declared_sups;
};

enum class Verdict { Converged, Bounded, Divergent };
const char* to_string(Verdict v);

struct LogStep {
    double t = 0;
    Vec q, qdot, e, edot, e_D, qdot_des, qddot_des;
    Vec tau, tau_des, tau_dis_hat, tau_load, psi;
    double eD_norm = 0;
    double V = 0;              // 1/2 e_D^T M(q) e_D
    double Vdot = 0;           // analytic rate, -e_D^T G M_n e_D - e_D^T psi
    double passivity = 0;      // running integral of e_D^T psi
    double error_dynamics_residual = 0;  // ||M eDdot + C e_D + G M_n e_D + psi||
    double margin = 0;         // sufficient-condition margin at this step
};

struct RunLog {
    int n = 0;
    std::vector<LogStep> steps;

    Verdict verdict = Verdict::Bounded;
    bool gamma_violated = false;   // finite run whose settled ||e_D|| exceeds Gamma
    bool nonfinite = false;
    double diverged_at = -1.0;     // s, < 0 if the threshold never tripped
    bool saturated = false;

    // measured suprema over the whole run
    double sup_qddot_des = 0, sup_qdot = 0, sup_qdot_des = 0, sup_eD = 0;

    // settle-window statistics
    double settle_start = 0;       // s
    double settled_max_e = 0, settled_max_eD = 0;

    BetaConstants betas;
    double gamma_post = 0;         // a-posteriori Gamma from measured suprema
    double passivity_infimum = 0;
    double max_error_dynamics_residual = 0;
    double max_psi_norm = 0;
};

/// One fixed step of the chosen scheme for y' = rhs(t, y).
Vec integrator_step(const std::function<Vec(double, const Vec&)>& rhs, double t, const Vec& y,
                    double dt, Integrator scheme);

/// Closed-loop integration of plant + observer under the scripted reference
/// and disturbance schedule. Divergence is a result, not an exception: the
/// log is returned partial with verdict Divergent.
RunLog run_scenario(const ManipulatorModel& model, const ControllerConfig& cfg,
                    const Reference& ref, const DisturbanceSchedule& dist, const SimConfig& sim,
                    const AnalysisConfig& analysis = {});

}  // namespace dobsim
