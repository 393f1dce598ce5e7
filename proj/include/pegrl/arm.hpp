#pragma once

#include "pegrl/math.hpp"

#include <stdexcept>
#include <string>

namespace pegrl {

// Planar n-DOF revolute arm. All joints rotate about z; the plant lives in the
// horizontal plane, so there are no gravity or Coriolis terms.
struct ArmParams {
    int n_joints = 3;
    JointVec link_lengths;    // m
    JointVec joint_inertia;   // kg m^2, diagonal
    JointVec joint_damping;   // N m s / rad
    JointVec joint_limit_lo;  // rad
    JointVec joint_limit_hi;  // rad
    JointVec torque_limit;    // N m, symmetric magnitude
    double damping_lambda = 1e-4;

    static ArmParams defaults(int n = 3);
    void validate() const;
};

struct JointState {
    JointVec q;        // rad
    JointVec v;        // rad/s
    JointVec tau_ext;  // N m, measured external torques

    static JointState zero(int n) {
        JointState s;
        s.q = JointVec::Zero(n);
        s.v = JointVec::Zero(n);
        s.tau_ext = JointVec::Zero(n);
        return s;
    }
};

struct PlanarPose {
    double x = 0.0;
    double y = 0.0;
    double phi = 0.0;  // rad, wrapped to (-pi, pi]

    Vec2 position() const { return {x, y}; }
};

struct PlanarWrench {
    double fx = 0.0;
    double fy = 0.0;
    double tz = 0.0;

    static PlanarWrench zero() { return {}; }
    Vec3 vec() const { return {fx, fy, tz}; }
    static PlanarWrench from_vec(const Vec3& w) { return {w[0], w[1], w[2]}; }
};

// Pose difference target - pose as (dx, dy, dphi) with wrapped angle.
inline Vec3 pose_error(const PlanarPose& target, const PlanarPose& pose) {
    return {target.x - pose.x, target.y - pose.y, angle_diff(target.phi, pose.phi)};
}

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct PlantError : std::runtime_error {
    explicit PlantError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularMatrixError : std::runtime_error {
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

PlanarPose forward_kinematics(const JointVec& q, const ArmParams& params);

// 3 x n; rows are (dx/dq, dy/dq, dphi/dq). Third row is all ones for a planar
// revolute chain.
JacMat jacobian(const JointVec& q, const ArmParams& params);

// J^+ = J^T (J J^T + lambda^2 I)^-1. Throws SingularMatrixError when lambda = 0
// and J J^T is not invertible.
PinvMat damped_pinv(const JacMat& jac, double lambda);

struct IkResult {
    JointVec q;
    bool converged = false;
    int iterations = 0;
    double residual_norm = 0.0;
};

// Damped least-squares IK seeded at `seed`. Position error in meters and angle
// error in radians share one norm; tol is in those mixed units.
IkResult inverse_kinematics(const PlanarPose& target, const JointVec& seed,
                            const ArmParams& params, double tol = 1e-6, int max_iters = 50);

// Semi-implicit Euler step. tau_cmd is clamped to the torque limit, the contact
// wrench acts at the TCP, and joints are clamped to their limits with the
// velocity zeroed on any clamped axis.
JointState step_dynamics(const JointState& state, const JointVec& tau_cmd,
                         const PlanarWrench& contact, double dt, const ArmParams& params);

}  // namespace pegrl
