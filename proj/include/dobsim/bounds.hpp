#pragma once

#include "dobsim/controller.hpp"
#include "dobsim/dynamics.hpp"

namespace dobsim {

/// Box restriction of the workspace over which the theory constants are
/// grid-estimated.
struct WorkspaceBox {
    Vec q_min;     // rad
    Vec q_max;     // rad
    Vec qdot_max;  // rad/s
    int grid_points_per_dim = 41;

    void validate(int n) const;  // throws std::invalid_argument
    static WorkspaceBox full_revolution(int n, double qdot_max_val,
                                        int grid_points_per_dim = 41);
};

struct BetaConstants {
    double beta_M_min = 0;    // kg m^2, min eigenvalue of M over the box
    double beta_M_max = 0;    // kg m^2
    double beta_C = 0;        // kg m^2, ||C(q,qd) v|| <= beta_C ||qd|| ||v||
    double beta_g = 0;        // N m
    double beta_dM_min = 0;   // kg m^2, min singular value of M - M_n
    double beta_dM_max = 0;   // kg m^2, max spectral norm of M - M_n
    double beta_fric_max = 0; // N m
    double beta_load_max = 0; // N m
    double beta_Mn_min = 0;   // kg m^2
    double beta_Mn_max = 0;   // kg m^2
};

/// Grid maximization/minimization of every constant the stability theory
/// quantifies over. Consistent over-approximations within the box; see the
/// refinement-monotonicity tests.
BetaConstants estimate_betas(const ManipulatorModel& model, const ControllerConfig& cfg,
                             const WorkspaceBox& box, double declared_load_bound = 0.0);

enum class Dominance { Dominant, Dominated, Indefinite };

/// Classifies dM(q) = M(q) - M_n over the grid: negative semidefinite
/// everywhere -> Dominant; positive definite somewhere and never NSD ->
/// Dominated; anything else -> Indefinite.
Dominance nominal_dominance(const ManipulatorModel& model, const ControllerConfig& cfg,
                            const WorkspaceBox& box);

const char* to_string(Dominance d);

/// Ultimate bound of the dynamic-error norm:
/// Gamma = (beta_dM_max |qddot_des| + beta_C |qdot| |qdot_des| + beta_g
///          + beta_fric_max + beta_load_max) / (g_dob beta_Mn_min).
/// Suprema can be declared a priori or measured from a completed run.
double ultimate_bound_gamma(const BetaConstants& betas, double g_dob, double qddot_des_sup,
                            double qdot_sup, double qdot_des_sup);

/// Most conservative scalar reading of the velocity-measurement constraint:
/// g_dob_max = g_v beta_M_min / (2 beta_Mn_max). Returns +inf when g_v = 0
/// (exact velocity, no measurement limit).
double bandwidth_upper_bound(const BetaConstants& betas, double g_v);

}  // namespace dobsim
