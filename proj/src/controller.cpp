#include "dobsim/controller.hpp"

#include <cmath>

namespace dobsim {

bool ControllerConfig::uniform_bandwidth() const {
    for (int i = 1; i < g_dob.size(); ++i)
        if (g_dob[i] != g_dob[0]) return false;
    return true;
}

void ControllerConfig::validate() const {
    const int n = dof();
    if (n < 1) throw std::invalid_argument("ControllerConfig: empty g_dob");
    if (M_n.rows() != n || M_n.cols() != n)
        throw std::invalid_argument("ControllerConfig: M_n must be n x n");
    if (!M_n.isApprox(M_n.transpose(), 1e-12))
        throw std::invalid_argument("ControllerConfig: M_n must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(M_n);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
        throw std::invalid_argument("ControllerConfig: M_n must be positive definite");
    if (K_D.size() != n || K_P.size() != n)
        throw std::invalid_argument("ControllerConfig: gain dimension mismatch");
    if (g_dob.minCoeff() < 0.0 || K_D.minCoeff() < 0.0 || K_P.minCoeff() < 0.0 || g_v < 0.0)
        throw std::invalid_argument("ControllerConfig: bandwidths and gains must be >= 0");
    if (tau_sat < 0.0) throw std::invalid_argument("ControllerConfig: tau_sat must be >= 0");
}

DObState dob_init(const ControllerConfig& cfg, const Vec& q0, const Vec& qdot0,
                  const Vec& tau_dis_hat0) {
    DObState s;
    s.w = tau_dis_hat0 + cfg.g_dob.asDiagonal() * (cfg.M_n * qdot0);
    s.q_lp = q0;
    return s;
}

Vec desired_acceleration(const ControllerConfig& cfg, const Vec& q, const Vec& qdot,
                         const RefSample& ref) {
    return ref.qddot - cfg.K_D.cwiseProduct(qdot - ref.qdot) - cfg.K_P.cwiseProduct(q - ref.q);
}

Vec desired_torque(const ControllerConfig& cfg, const Vec& qddot_des) {
    return cfg.M_n * qddot_des;
}

Vec dob_output(const ControllerConfig& cfg, const DObState& dob, const Vec& qdot_meas) {
    return dob.w - cfg.g_dob.asDiagonal() * (cfg.M_n * qdot_meas);
}

std::pair<DObState, Vec> dob_update(const ControllerConfig& cfg, const DObState& dob,
                                    const Vec& tau_des, const Vec& qdot_meas, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dob_update: dt must be > 0");
    const Vec tau_dis_hat = dob_output(cfg, dob, qdot_meas);
    DObState next = dob;
    // w' = G tau_des; tau_des is held over the step, so every fixed-step
    // scheme reduces to the same update.
    next.w += dt * (cfg.g_dob.asDiagonal() * tau_des);
    return {next, tau_dis_hat};
}

Vec dob_estimate_algebraic(const ControllerConfig& cfg, const Vec& qdot_des, const Vec& qdot) {
    if (!cfg.uniform_bandwidth())
        throw UnsupportedConfiguration(
            "dob_estimate_algebraic: the algebraic form requires a uniform bandwidth");
    return cfg.g_dob[0] * (cfg.M_n * (qdot_des - qdot));
}

std::pair<Vec, Vec> velocity_filter(const ControllerConfig& cfg, const Vec& q_lp,
                                    const Vec& q_meas, double dt) {
    if (cfg.g_v <= 0.0) return {q_lp, Vec::Zero(q_meas.size())};
    const Vec qdot_est = cfg.g_v * (q_meas - q_lp);
    // Exact zero-order-hold discretization of q_lp' = g_v (q - q_lp).
    const double a = std::exp(-cfg.g_v * dt);
    const Vec next = q_meas + a * (q_lp - q_meas);
    return {next, qdot_est};
}

std::pair<ControllerOutput, DObState> control_torque(const ControllerConfig& cfg,
                                                     const DObState& dob, const Vec& q_meas,
                                                     const Vec& qdot_true, const RefSample& ref,
                                                     double dt) {
    DObState next = dob;
    Vec qdot_est = qdot_true;
    if (cfg.g_v > 0.0) {
        auto [q_lp, v] = velocity_filter(cfg, dob.q_lp, q_meas, dt);
        next.q_lp = q_lp;
        qdot_est = v;
    }

    ControllerOutput out;
    out.qdot_est = qdot_est;
    out.qddot_des = desired_acceleration(cfg, q_meas, qdot_est, ref);
    out.tau_des = desired_torque(cfg, out.qddot_des);
    out.tau_dis_hat = dob_output(cfg, next, qdot_est);
    out.tau = out.tau_des + out.tau_dis_hat;
    if (cfg.tau_sat > 0.0) {
        for (int i = 0; i < out.tau.size(); ++i) {
            if (std::abs(out.tau[i]) > cfg.tau_sat) {
                out.tau[i] = std::copysign(cfg.tau_sat, out.tau[i]);
                out.saturated = true;
            }
        }
    }
    next.w += dt * (cfg.g_dob.asDiagonal() * out.tau_des);
    return {out, next};
}

}  // namespace dobsim
