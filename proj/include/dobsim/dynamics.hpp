#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace dobsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown by forward_dynamics when the inertia matrix is numerically
/// degenerate (cannot happen for the planar models with inertia_com > 0,
/// but guarded anyway).
struct DegenerateConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LinkParams {
    double length;       // m
    double mass;         // kg
    double com_offset;   // m, distance from the proximal joint to the link COM
    double inertia_com;  // kg m^2, rotational inertia about the COM
};

/// Planar serial arm with revolute joints (n = 2 or 3), viscous + smoothed
/// Coulomb friction and optional gravity (gravity_accel = 0 models the
/// horizontal-plane case).
struct ManipulatorModel {
    std::vector<LinkParams> links;
    double gravity_accel = 0.0;  // m/s^2
    Vec viscous_friction;        // N m s / rad, per joint
    Vec coulomb_friction;        // N m, per joint
    double coulomb_smoothing = 1e-3;  // rad/s, tanh width for the Coulomb term
    double condition_limit = 1e12;    // forward_dynamics guard

    int dof() const { return static_cast<int>(links.size()); }
    void validate() const;  // throws std::invalid_argument
};

struct JointState {
    Vec q;     // rad
    Vec qdot;  // rad/s
};

/// Inertia matrix M(q), symmetric positive definite by construction.
Mat mass_matrix(const ManipulatorModel& model, const Vec& q);

/// Analytic partial derivatives dM/dq_k, k = 0..n-1.
std::vector<Mat> mass_matrix_partials(const ManipulatorModel& model, const Vec& q);

/// Coriolis/centrifugal matrix built from Christoffel symbols of the first
/// kind, so that dM/dt - 2C is skew-symmetric.
Mat coriolis_matrix(const ManipulatorModel& model, const Vec& q, const Vec& qdot);

/// C(q, e_k): the k-th Christoffel slice. coriolis_matrix(q, qdot) equals
/// sum_k qdot[k] * christoffel_slice(q, k).
Mat christoffel_slice(const ManipulatorModel& model, const Vec& q, int k);

/// Gravity torque g(q) = dU/dq; zero vector when gravity_accel = 0.
Vec gravity_vector(const ManipulatorModel& model, const Vec& q);

/// Viscous + tanh-smoothed Coulomb friction torque.
Vec friction_torque(const ManipulatorModel& model, const Vec& qdot);

/// Solves M(q) qddot = tau - C qdot - g - tau_fric - tau_load.
Vec forward_dynamics(const ManipulatorModel& model, const JointState& state,
                     const Vec& tau, const Vec& tau_load);

double potential_energy(const ManipulatorModel& model, const Vec& q);
double kinetic_energy(const ManipulatorModel& model, const Vec& q, const Vec& qdot);

/// Planar tip position (x, y) and its 2 x n Jacobian.
Eigen::Vector2d tip_position(const ManipulatorModel& model, const Vec& q);
Mat tip_jacobian(const ManipulatorModel& model, const Vec& q);

}  // namespace dobsim
