#include "dobsim/bounds.hpp"

#include <cmath>
#include <limits>

namespace dobsim {
namespace {

// Visits every grid point of the box's q-lattice.
template <class F>
void for_each_grid_point(const WorkspaceBox& box, int n, F&& visit) {
    const int m = box.grid_points_per_dim;
    std::vector<int> idx(n, 0);
    Vec q(n);
    while (true) {
        for (int d = 0; d < n; ++d)
            q[d] = box.q_min[d] + (box.q_max[d] - box.q_min[d]) * idx[d] / (m - 1);
        visit(q);
        int d = 0;
        while (d < n && ++idx[d] == m) idx[d++] = 0;
        if (d == n) break;
    }
}

double spectral_norm(const Mat& a) {
    return a.jacobiSvd().singularValues().maxCoeff();
}

}  // namespace

void WorkspaceBox::validate(int n) const {
    if (q_min.size() != n || q_max.size() != n || qdot_max.size() != n)
        throw std::invalid_argument("WorkspaceBox: dimension mismatch");
    for (int i = 0; i < n; ++i)
        if (!(q_min[i] < q_max[i]))
            throw std::invalid_argument("WorkspaceBox: q_min must be < q_max componentwise");
    if (grid_points_per_dim < 3)
        throw std::invalid_argument("WorkspaceBox: grid_points_per_dim must be >= 3");
}

WorkspaceBox WorkspaceBox::full_revolution(int n, double qdot_max_val, int grid_points_per_dim) {
    WorkspaceBox box;
    box.q_min = Vec::Constant(n, -M_PI);
    box.q_max = Vec::Constant(n, M_PI);
    box.qdot_max = Vec::Constant(n, qdot_max_val);
    box.grid_points_per_dim = grid_points_per_dim;
    return box;
}

BetaConstants estimate_betas(const ManipulatorModel& model, const ControllerConfig& cfg,
                             const WorkspaceBox& box, double declared_load_bound) {
    const int n = model.dof();
    box.validate(n);

    BetaConstants b;
    b.beta_M_min = std::numeric_limits<double>::infinity();
    b.beta_dM_min = std::numeric_limits<double>::infinity();

    Eigen::SelfAdjointEigenSolver<Mat> eig;
    for_each_grid_point(box, n, [&](const Vec& q) {
        const Mat M = mass_matrix(model, q);
        eig.compute(M);
        b.beta_M_min = std::min(b.beta_M_min, eig.eigenvalues().minCoeff());
        b.beta_M_max = std::max(b.beta_M_max, eig.eigenvalues().maxCoeff());

        eig.compute(M - cfg.M_n);
        b.beta_dM_max = std::max(b.beta_dM_max, eig.eigenvalues().cwiseAbs().maxCoeff());
        b.beta_dM_min = std::min(b.beta_dM_min, eig.eigenvalues().cwiseAbs().minCoeff());

        b.beta_g = std::max(b.beta_g, gravity_vector(model, q).norm());

        // ||sum_k u_k C_k(q) v|| <= sqrt(sum_k ||C_k||_2^2) ||u|| ||v||, so this
        // is a direction-free over-approximation of the Coriolis constant.
        double c_sq = 0.0;
        for (int k = 0; k < n; ++k) {
            const double s = spectral_norm(christoffel_slice(model, q, k));
            c_sq += s * s;
        }
        b.beta_C = std::max(b.beta_C, std::sqrt(c_sq));
    });

    // The friction norm is componentwise monotone in |qdot|, so the box
    // corner is the exact maximizer.
    Vec fric(n);
    for (int i = 0; i < n; ++i)
        fric[i] = model.viscous_friction[i] * box.qdot_max[i] +
                  model.coulomb_friction[i] *
                      std::tanh(box.qdot_max[i] / model.coulomb_smoothing);
    b.beta_fric_max = fric.norm();

    b.beta_load_max = declared_load_bound;

    eig.compute(cfg.M_n);
    b.beta_Mn_min = eig.eigenvalues().minCoeff();
    b.beta_Mn_max = eig.eigenvalues().maxCoeff();
    return b;
}

Dominance nominal_dominance(const ManipulatorModel& model, const ControllerConfig& cfg,
                            const WorkspaceBox& box) {
    const int n = model.dof();
    box.validate(n);

    bool all_nsd = true;
    bool any_nsd = false;
    bool any_pd = false;
    Eigen::SelfAdjointEigenSolver<Mat> eig;
    for_each_grid_point(box, n, [&](const Vec& q) {
        eig.compute(mass_matrix(model, q) - cfg.M_n);
        const double lmin = eig.eigenvalues().minCoeff();
        const double lmax = eig.eigenvalues().maxCoeff();
        const double tol = 1e-12 * std::max(1.0, std::abs(lmax));
        if (lmax <= tol)
            any_nsd = true;
        else
            all_nsd = false;
        if (lmin > tol) any_pd = true;
    });

    if (all_nsd) return Dominance::Dominant;
    if (any_pd && !any_nsd) return Dominance::Dominated;
    return Dominance::Indefinite;
}

const char* to_string(Dominance d) {
    switch (d) {
        case Dominance::Dominant: return "dominant";
        case Dominance::Dominated: return "dominated";
        default: return "indefinite";
    }
}

double ultimate_bound_gamma(const BetaConstants& betas, double g_dob, double qddot_des_sup,
                            double qdot_sup, double qdot_des_sup) {
    const double denom = g_dob * betas.beta_Mn_min;
    if (!(denom > 0.0))
        throw std::invalid_argument("ultimate_bound_gamma: g_dob * beta_Mn_min must be > 0");
    return (betas.beta_dM_max * qddot_des_sup + betas.beta_C * qdot_sup * qdot_des_sup +
            betas.beta_g + betas.beta_fric_max + betas.beta_load_max) /
           denom;
}

double bandwidth_upper_bound(const BetaConstants& betas, double g_v) {
    if (g_v <= 0.0) return std::numeric_limits<double>::infinity();
    return g_v * betas.beta_M_min / (2.0 * betas.beta_Mn_max);
}

}  // namespace dobsim
