#pragma once

#include "dobsim/dynamics.hpp"

#include <utility>

namespace dobsim {

/// Thrown when an operation is asked for a configuration it is not derived
/// for (e.g. the algebraic observer form with per-joint bandwidths).
struct UnsupportedConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ControllerConfig {
    Mat M_n;     // nominal inertia, kg m^2, symmetric with lambda_min > 0
    Vec g_dob;   // per-joint observer bandwidths, rad/s
    Vec K_D;     // diagonal velocity gains, 1/s
    Vec K_P;     // diagonal position gains, 1/s^2
    double g_v = 0.0;      // velocity pseudo-derivative bandwidth, rad/s; 0 = exact velocity
    double tau_sat = 0.0;  // per-joint torque saturation, N m; 0 = unlimited

    int dof() const { return static_cast<int>(g_dob.size()); }
    bool uniform_bandwidth() const;
    void validate() const;  // throws std::invalid_argument
};

/// Observer integrator state w plus the internal state of the velocity
/// pseudo-derivative (a low-passed copy of the position measurement).
struct DObState {
    Vec w;     // N m
    Vec q_lp;  // rad
};

struct RefSample {
    Vec q;      // rad
    Vec qdot;   // rad/s
    Vec qddot;  // rad/s^2
};

struct ControllerOutput {
    Vec tau;          // applied torque, N m (tau_des + tau_dis_hat, saturated if configured)
    Vec tau_des;      // N m
    Vec tau_dis_hat;  // N m
    Vec qddot_des;    // rad/s^2
    Vec qdot_est;     // rad/s, velocity used by the control law
    bool saturated = false;
};

/// Consistent initial observer state: w(0) = tau_dis_hat(0) + G M_n qdot(0),
/// so the integrator realization matches the algebraic form from t = 0.
DObState dob_init(const ControllerConfig& cfg, const Vec& q0, const Vec& qdot0,
                  const Vec& tau_dis_hat0);

/// qddot_des = qddot_ref - K_D (qdot - qdot_ref) - K_P (q - q_ref)
Vec desired_acceleration(const ControllerConfig& cfg, const Vec& q, const Vec& qdot,
                         const RefSample& ref);

/// tau_des = M_n qddot_des
Vec desired_torque(const ControllerConfig& cfg, const Vec& qddot_des);

/// One step of the acceleration-free observer realization
/// (w' = G tau_des, tau_dis_hat = w - G M_n qdot). Returns the estimate at
/// the current state and the advanced state.
std::pair<DObState, Vec> dob_update(const ControllerConfig& cfg, const DObState& dob,
                                    const Vec& tau_des, const Vec& qdot_meas, double dt);

/// Observer output without advancing the state.
Vec dob_output(const ControllerConfig& cfg, const DObState& dob, const Vec& qdot_meas);

/// Algebraic reduction tau_dis_hat = g_dob M_n (qdot_des - qdot). Requires a
/// uniform bandwidth; qdot_des is the running integral of qddot_des from
/// qdot_des(0) = qdot(0).
Vec dob_estimate_algebraic(const ControllerConfig& cfg, const Vec& qdot_des, const Vec& qdot);

/// Dirty-derivative velocity estimate, g_v s / (s + g_v) applied to q.
/// Returns the new filter state and the estimate. With g_v = 0 the input
/// state is passed through and qdot_est must come from elsewhere.
std::pair<Vec, Vec> velocity_filter(const ControllerConfig& cfg, const Vec& q_lp,
                                    const Vec& q_meas, double dt);

/// Sampled-mode composition: velocity filtering, outer PD loop, nominal
/// torque, observer output, torque sum (optionally saturated), observer
/// state advance.
std::pair<ControllerOutput, DObState> control_torque(const ControllerConfig& cfg,
                                                     const DObState& dob, const Vec& q_meas,
                                                     const Vec& qdot_true, const RefSample& ref,
                                                     double dt);

}  // namespace dobsim
