#include "pegrl/arm.hpp"

#include <cmath>

namespace pegrl {

ArmParams ArmParams::defaults(int n) {
    ArmParams p;
    p.n_joints = n;
    p.link_lengths = JointVec::Zero(n);
    if (n == 3) {
        p.link_lengths << 0.30, 0.30, 0.10;
    } else {
        // Spread the same 0.7 m reach over n links, short distal link.
        const double proximal = 0.6 / (n - 1);
        for (int i = 0; i < n - 1; ++i) p.link_lengths[i] = proximal;
        p.link_lengths[n - 1] = 0.10;
    }
    p.joint_inertia = JointVec::Constant(n, 0.05);
    p.joint_damping = JointVec::Constant(n, 0.2);
    p.joint_limit_lo = JointVec::Constant(n, -2.9);
    p.joint_limit_hi = JointVec::Constant(n, 2.9);
    p.torque_limit = JointVec::Constant(n, 50.0);
    p.damping_lambda = 1e-4;
    return p;
}

void ArmParams::validate() const {
    if (n_joints < 2) throw ConfigError("arm: n_joints must be >= 2");
    auto check_len = [&](const JointVec& v, const char* name) {
        if (v.size() != n_joints) throw ConfigError(std::string("arm: ") + name + " length mismatch");
    };
    check_len(link_lengths, "link_lengths");
    check_len(joint_inertia, "joint_inertia");
    check_len(joint_damping, "joint_damping");
    check_len(joint_limit_lo, "joint_limit_lo");
    check_len(joint_limit_hi, "joint_limit_hi");
    check_len(torque_limit, "torque_limit");
    if ((link_lengths.array() <= 0.0).any()) throw ConfigError("arm: link lengths must be positive");
    if ((joint_inertia.array() <= 0.0).any()) throw ConfigError("arm: inertias must be positive");
    if ((joint_damping.array() <= 0.0).any()) throw ConfigError("arm: damping must be positive");
    if (damping_lambda < 0.0) throw ConfigError("arm: damping_lambda must be >= 0");
}

static void check_dim(const JointVec& q, const ArmParams& params, const char* where) {
    if (q.size() != params.n_joints)
        throw ConfigError(std::string(where) + ": joint vector dimension mismatch");
}

PlanarPose forward_kinematics(const JointVec& q, const ArmParams& params) {
    check_dim(q, params, "forward_kinematics");
    double x = 0.0, y = 0.0, c = 0.0;
    for (int i = 0; i < params.n_joints; ++i) {
        c += q[i];
        x += params.link_lengths[i] * std::cos(c);
        y += params.link_lengths[i] * std::sin(c);
    }
    return {x, y, wrap_angle(c)};
}

JacMat jacobian(const JointVec& q, const ArmParams& params) {
    check_dim(q, params, "jacobian");
    const int n = params.n_joints;
    JacMat jac(3, n);
    // Link-end positions relative to base, accumulated once.
    double c = 0.0;
    double ex = 0.0, ey = 0.0;  // running tip position
    JointVec px(n), py(n);      // joint i position
    for (int i = 0; i < n; ++i) {
        px[i] = ex;
        py[i] = ey;
        c += q[i];
        ex += params.link_lengths[i] * std::cos(c);
        ey += params.link_lengths[i] * std::sin(c);
    }
    for (int j = 0; j < n; ++j) {
        jac(0, j) = -(ey - py[j]);
        jac(1, j) = ex - px[j];
        jac(2, j) = 1.0;
    }
    return jac;
}

PinvMat damped_pinv(const JacMat& jac, double lambda) {
    Eigen::Matrix3d jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda * lambda;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(jjt);
    if (!lu.isInvertible()) throw SingularMatrixError("damped_pinv: J J^T singular with lambda = 0");
    return jac.transpose() * lu.inverse();
}

IkResult inverse_kinematics(const PlanarPose& target, const JointVec& seed,
                            const ArmParams& params, double tol, int max_iters) {
    check_dim(seed, params, "inverse_kinematics");
    IkResult out;
    out.q = seed;
    Vec3 err = pose_error(target, forward_kinematics(out.q, params));
    out.residual_norm = err.norm();
    for (int it = 0; it < max_iters; ++it) {
        if (out.residual_norm < tol) {
            out.converged = true;
            out.iterations = it;
            return out;
        }
        const JacMat jac = jacobian(out.q, params);
        out.q += damped_pinv(jac, params.damping_lambda) * err;
        err = pose_error(target, forward_kinematics(out.q, params));
        out.residual_norm = err.norm();
    }
    out.converged = out.residual_norm < tol;
    out.iterations = max_iters;
    return out;
}

JointState step_dynamics(const JointState& state, const JointVec& tau_cmd,
                         const PlanarWrench& contact, double dt, const ArmParams& params) {
    check_dim(state.q, params, "step_dynamics");
    check_dim(tau_cmd, params, "step_dynamics");
    if (dt <= 0.0) throw ConfigError("step_dynamics: dt must be > 0");
    if (!state.q.allFinite() || !state.v.allFinite() || !tau_cmd.allFinite() ||
        !std::isfinite(contact.fx) || !std::isfinite(contact.fy) || !std::isfinite(contact.tz))
        throw PlantError("step_dynamics: non-finite input");

    const int n = params.n_joints;
    const JacMat jac = jacobian(state.q, params);
    const JointVec tau_contact = jac.transpose() * contact.vec();
    JointVec tau = tau_cmd.cwiseMin(params.torque_limit).cwiseMax(-params.torque_limit);

    JointState next;
    next.v = state.v + dt * ((tau + tau_contact - params.joint_damping.cwiseProduct(state.v))
                                 .cwiseQuotient(params.joint_inertia));
    next.q = state.q + dt * next.v;
    for (int i = 0; i < n; ++i) {
        if (next.q[i] < params.joint_limit_lo[i]) {
            next.q[i] = params.joint_limit_lo[i];
            next.v[i] = 0.0;
        } else if (next.q[i] > params.joint_limit_hi[i]) {
            next.q[i] = params.joint_limit_hi[i];
            next.v[i] = 0.0;
        }
    }
    next.tau_ext = tau_contact;
    return next;
}

}  // namespace pegrl
