#include "dobsim/dynamics.hpp"

#include <cmath>

namespace dobsim {
namespace {

Eigen::Vector2d rot90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

// Joint origins o[0..n] (o[n] is the tip) and link COM positions p[0..n-1]
// for a planar chain. Everything downstream is expressed through the
// identities dp_k/dq_m = rot90(p_k - o_m) for m <= k and
// do_i/dq_m = rot90(o_i - o_m) for m < i.
struct PlanarFrames {
    std::vector<Eigen::Vector2d> origin;  // size n + 1
    std::vector<Eigen::Vector2d> com;     // size n
};

PlanarFrames frames(const ManipulatorModel& model, const Vec& q) {
    const int n = model.dof();
    PlanarFrames f;
    f.origin.resize(n + 1);
    f.com.resize(n);
    f.origin[0].setZero();
    double theta = 0.0;
    for (int i = 0; i < n; ++i) {
        theta += q[i];
        const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
        f.com[i] = f.origin[i] + model.links[i].com_offset * dir;
        f.origin[i + 1] = f.origin[i] + model.links[i].length * dir;
    }
    return f;
}

}  // namespace

void ManipulatorModel::validate() const {
    const int n = dof();
    if (n != 2 && n != 3)
        throw std::invalid_argument("ManipulatorModel: number of links must be 2 or 3");
    for (int i = 0; i < n; ++i) {
        const auto& l = links[i];
        if (!(l.length > 0.0)) throw std::invalid_argument("LinkParams: length must be > 0");
        if (!(l.mass > 0.0)) throw std::invalid_argument("LinkParams: mass must be > 0");
        if (!(l.inertia_com >= 0.0))
            throw std::invalid_argument("LinkParams: inertia_com must be >= 0");
        if (!(l.com_offset >= 0.0 && l.com_offset <= l.length))
            throw std::invalid_argument("LinkParams: com_offset must lie in [0, length]");
    }
    if (viscous_friction.size() != n || coulomb_friction.size() != n)
        throw std::invalid_argument("ManipulatorModel: friction vectors must have one entry per joint");
    if (viscous_friction.minCoeff() < 0.0 || coulomb_friction.minCoeff() < 0.0)
        throw std::invalid_argument("ManipulatorModel: friction coefficients must be >= 0");
    if (!(coulomb_smoothing > 0.0))
        throw std::invalid_argument("ManipulatorModel: coulomb_smoothing must be > 0");
}

Mat mass_matrix(const ManipulatorModel& model, const Vec& q) {
    const int n = model.dof();
    const PlanarFrames f = frames(model, q);
    Mat M = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double m_ij = 0.0;
            for (int k = j; k < n; ++k) {
                // dp_k/dq_i . dp_k/dq_j = (p_k - o_i) . (p_k - o_j)
                m_ij += model.links[k].inertia_com +
                        model.links[k].mass * (f.com[k] - f.origin[i]).dot(f.com[k] - f.origin[j]);
            }
            M(i, j) = m_ij;
            M(j, i) = m_ij;
        }
    }
    return M;
}

std::vector<Mat> mass_matrix_partials(const ManipulatorModel& model, const Vec& q) {
    const int n = model.dof();
    const PlanarFrames f = frames(model, q);

    auto d_com = [&](int k, int m) -> Eigen::Vector2d {
        return m <= k ? rot90(f.com[k] - f.origin[m]) : Eigen::Vector2d::Zero();
    };
    auto d_origin = [&](int i, int m) -> Eigen::Vector2d {
        return m < i ? rot90(f.origin[i] - f.origin[m]) : Eigen::Vector2d::Zero();
    };

    std::vector<Mat> dM(n, Mat::Zero(n, n));
    for (int m = 0; m < n; ++m) {
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                double v = 0.0;
                for (int k = j; k < n; ++k) {
                    const Eigen::Vector2d ri = f.com[k] - f.origin[i];
                    const Eigen::Vector2d rj = f.com[k] - f.origin[j];
                    const Eigen::Vector2d dri = d_com(k, m) - d_origin(i, m);
                    const Eigen::Vector2d drj = d_com(k, m) - d_origin(j, m);
                    v += model.links[k].mass * (dri.dot(rj) + ri.dot(drj));
                }
                dM[m](i, j) = v;
                dM[m](j, i) = v;
            }
        }
    }
    return dM;
}

Mat coriolis_matrix(const ManipulatorModel& model, const Vec& q, const Vec& qdot) {
    const int n = model.dof();
    const std::vector<Mat> dM = mass_matrix_partials(model, q);
    Mat C = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                C(i, j) += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qdot[k];
    return C;
}

Mat christoffel_slice(const ManipulatorModel& model, const Vec& q, int k) {
    const int n = model.dof();
    const std::vector<Mat> dM = mass_matrix_partials(model, q);
    Mat Ck = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            Ck(i, j) = 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k));
    return Ck;
}

Vec gravity_vector(const ManipulatorModel& model, const Vec& q) {
    const int n = model.dof();
    Vec g = Vec::Zero(n);
    if (model.gravity_accel == 0.0) return g;
    const PlanarFrames f = frames(model, q);
    for (int i = 0; i < n; ++i) {
        double gi = 0.0;
        // dU/dq_i = g * sum_{k >= i} m_k dy_k/dq_i, and dy_k/dq_i = (p_k - o_i)_x
        for (int k = i; k < n; ++k)
            gi += model.links[k].mass * (f.com[k].x() - f.origin[i].x());
        g[i] = model.gravity_accel * gi;
    }
    return g;
}

Vec friction_torque(const ManipulatorModel& model, const Vec& qdot) {
    const int n = model.dof();
    Vec tau(n);
    for (int i = 0; i < n; ++i)
        tau[i] = model.viscous_friction[i] * qdot[i] +
                 model.coulomb_friction[i] * std::tanh(qdot[i] / model.coulomb_smoothing);
    return tau;
}

Vec forward_dynamics(const ManipulatorModel& model, const JointState& state,
                     const Vec& tau, const Vec& tau_load) {
    const Mat M = mass_matrix(model, state.q);
    Eigen::SelfAdjointEigenSolver<Mat> eig(M);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > model.condition_limit)
        throw DegenerateConfiguration("forward_dynamics: inertia matrix is ill-conditioned");

    const Vec rhs = tau - coriolis_matrix(model, state.q, state.qdot) * state.qdot -
                    gravity_vector(model, state.q) - friction_torque(model, state.qdot) -
                    tau_load;
    return M.ldlt().solve(rhs);
}

double potential_energy(const ManipulatorModel& model, const Vec& q) {
    if (model.gravity_accel == 0.0) return 0.0;
    const PlanarFrames f = frames(model, q);
    double u = 0.0;
    for (int k = 0; k < model.dof(); ++k) u += model.links[k].mass * f.com[k].y();
    return model.gravity_accel * u;
}

double kinetic_energy(const ManipulatorModel& model, const Vec& q, const Vec& qdot) {
    return 0.5 * qdot.dot(mass_matrix(model, q) * qdot);
}

Eigen::Vector2d tip_position(const ManipulatorModel& model, const Vec& q) {
    return frames(model, q).origin[model.dof()];
}

Mat tip_jacobian(const ManipulatorModel& model, const Vec& q) {
    const int n = model.dof();
    const PlanarFrames f = frames(model, q);
    Mat J(2, n);
    for (int j = 0; j < n; ++j) {
        const Eigen::Vector2d col = rot90(f.origin[n] - f.origin[j]);
        J(0, j) = col.x();
        J(1, j) = col.y();
    }
    return J;
}

}  // namespace dobsim
