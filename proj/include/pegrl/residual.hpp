#pragma once

#include "pegrl/arm.hpp"

#include <optional>
#include <stdexcept>

namespace pegrl {

enum class ResidualMode { None, JointEffort, EEWrench, JointPosFeedback, EEPoseFeedback, Hybrid };

const char* residual_mode_name(ResidualMode m);
ResidualMode residual_mode_from_name(const std::string& name);

// Policy action dimensionality per formulation.
inline int action_dim(ResidualMode mode, int n_joints) {
    switch (mode) {
        case ResidualMode::None: return 0;
        case ResidualMode::JointEffort: return n_joints;
        case ResidualMode::EEWrench: return 3;
        case ResidualMode::JointPosFeedback: return n_joints;
        case ResidualMode::EEPoseFeedback: return 3;
        case ResidualMode::Hybrid: return 2 * n_joints;
    }
    return 0;
}

// Componentwise bounds applied to raw policy output via tanh squash.
struct ResidualBounds {
    double torque = 2.0;                  // N m per joint
    Vec3 wrench{4.0, 4.0, 1.0};           // N, N, N m
    double joint_delta = 0.035;           // rad per joint
    Vec3 pose_delta{0.01, 0.01, 0.05};    // m, m, rad

    Eigen::VectorXd scale(ResidualMode mode, int n_joints) const;
};

struct ModeError : std::logic_error {
    explicit ModeError(const std::string& what) : std::logic_error(what) {}
};

struct ResidualCommand {
    ResidualMode mode = ResidualMode::None;
    Eigen::VectorXd payload;  // already bounded

    static ResidualCommand zero(ResidualMode mode, int n_joints);
    // payload = bound * tanh(raw)
    static ResidualCommand from_raw(ResidualMode mode, const Eigen::VectorXd& raw, int n_joints,
                                    const ResidualBounds& bounds);

    // Hybrid halves: torques first, joint deltas second.
    Eigen::VectorXd torque_half() const { return payload.head(payload.size() / 2); }
    Eigen::VectorXd feedback_half() const { return payload.tail(payload.size() / 2); }
};

// a = f(o1, t) + a_rl, then plant torque clamp.
JointVec apply_joint_effort(const JointVec& f_out, const ResidualCommand& cmd,
                            const JointVec& torque_limit, bool* clamped = nullptr);

// a = f(o1, t) + J^T w_rl.
JointVec apply_ee_wrench(const JointVec& f_out, const ResidualCommand& cmd, const JointVec& q,
                         const ArmParams& params, bool* clamped = nullptr);

// o1' with q += delta; velocities and external torques untouched.
JointState apply_joint_pos_feedback(const JointState& o1, const ResidualCommand& cmd);

// o1' with q' = IK(FK(q) + delta, seed = q); on IK failure q' = q and the
// fallback counter is incremented.
JointState apply_ee_pose_feedback(const JointState& o1, const ResidualCommand& cmd,
                                  const ArmParams& params, long* ik_fallbacks = nullptr);

// Dispatch for one controller tick. `f` is the prior controller evaluated on
// the (possibly modified) feedback: JointVec f(const JointState&, int tick).
//
// Feedback-side modifications stay applied during buffer ticks: the buffer
// only stops fresh policy actions from being superposed, it does not restore
// the controller's raw feedback (the machine keeps seeing its virtual state).
template <class F>
JointVec compose_step(ResidualMode mode, const JointState& o1, F&& f,
                      const ResidualCommand* cmd, bool rl_gated, bool buffered, int tick,
                      const ArmParams& params, long* ik_fallbacks = nullptr,
                      bool* clamped = nullptr) {
    if (mode == ResidualMode::None || !rl_gated || cmd == nullptr) return f(o1, tick);
    if (cmd->mode != mode) throw ModeError("compose_step: command tag does not match mode");
    switch (mode) {
        case ResidualMode::JointEffort: {
            JointVec tau = f(o1, tick);
            return buffered ? tau : apply_joint_effort(tau, *cmd, params.torque_limit, clamped);
        }
        case ResidualMode::EEWrench: {
            JointVec tau = f(o1, tick);
            return buffered ? tau : apply_ee_wrench(tau, *cmd, o1.q, params, clamped);
        }
        case ResidualMode::JointPosFeedback:
            return f(apply_joint_pos_feedback(o1, *cmd), tick);
        case ResidualMode::EEPoseFeedback:
            return f(apply_ee_pose_feedback(o1, *cmd, params, ik_fallbacks), tick);
        case ResidualMode::Hybrid: {
            ResidualCommand fb{ResidualMode::JointPosFeedback, cmd->feedback_half()};
            JointVec tau = f(apply_joint_pos_feedback(o1, fb), tick);
            if (buffered) return tau;
            ResidualCommand eff{ResidualMode::JointEffort, cmd->torque_half()};
            return apply_joint_effort(tau, eff, params.torque_limit, clamped);
        }
        default: return f(o1, tick);
    }
}

// Feedback view used by the state machine: the same modification the
// controller sees, so C_suc checks run on the virtual state.
JointState observed_feedback(ResidualMode mode, const JointState& o1, const ResidualCommand* cmd,
                             bool rl_gated, const ArmParams& params, long* ik_fallbacks = nullptr);

}  // namespace pegrl
