#include "pegrl/residual.hpp"

#include <cmath>

namespace pegrl {

const char* residual_mode_name(ResidualMode m) {
    switch (m) {
        case ResidualMode::None: return "none";
        case ResidualMode::JointEffort: return "joint_effort";
        case ResidualMode::EEWrench: return "ee_wrench";
        case ResidualMode::JointPosFeedback: return "joint_pos_feedback";
        case ResidualMode::EEPoseFeedback: return "ee_pose_feedback";
        case ResidualMode::Hybrid: return "hybrid";
    }
    return "?";
}

ResidualMode residual_mode_from_name(const std::string& name) {
    if (name == "none") return ResidualMode::None;
    if (name == "joint_effort") return ResidualMode::JointEffort;
    if (name == "ee_wrench") return ResidualMode::EEWrench;
    if (name == "joint_pos_feedback") return ResidualMode::JointPosFeedback;
    if (name == "ee_pose_feedback") return ResidualMode::EEPoseFeedback;
    if (name == "hybrid") return ResidualMode::Hybrid;
    throw ConfigError("unknown residual mode: " + name);
}

Eigen::VectorXd ResidualBounds::scale(ResidualMode mode, int n) const {
    switch (mode) {
        case ResidualMode::None: return Eigen::VectorXd();
        case ResidualMode::JointEffort: return Eigen::VectorXd::Constant(n, torque);
        case ResidualMode::EEWrench: return wrench;
        case ResidualMode::JointPosFeedback: return Eigen::VectorXd::Constant(n, joint_delta);
        case ResidualMode::EEPoseFeedback: return pose_delta;
        case ResidualMode::Hybrid: {
            Eigen::VectorXd s(2 * n);
            s.head(n).setConstant(torque);
            s.tail(n).setConstant(joint_delta);
            return s;
        }
    }
    return Eigen::VectorXd();
}

ResidualCommand ResidualCommand::zero(ResidualMode mode, int n) {
    return {mode, Eigen::VectorXd::Zero(action_dim(mode, n))};
}

ResidualCommand ResidualCommand::from_raw(ResidualMode mode, const Eigen::VectorXd& raw, int n,
                                          const ResidualBounds& bounds) {
    const int d = action_dim(mode, n);
    if (raw.size() != d) throw ModeError("from_raw: raw action dimension mismatch");
    const Eigen::VectorXd s = bounds.scale(mode, n);
    ResidualCommand cmd;
    cmd.mode = mode;
    cmd.payload = s.cwiseProduct(raw.array().tanh().matrix());
    return cmd;
}

static void check_tag(const ResidualCommand& cmd, ResidualMode expected, Eigen::Index dim) {
    if (cmd.mode != expected) throw ModeError("residual: wrong payload tag");
    if (cmd.payload.size() != dim) throw ModeError("residual: payload dimension mismatch");
}

JointVec apply_joint_effort(const JointVec& f_out, const ResidualCommand& cmd,
                            const JointVec& torque_limit, bool* clamped) {
    check_tag(cmd, ResidualMode::JointEffort, f_out.size());
    JointVec sum = f_out + JointVec(cmd.payload);
    JointVec out = sum.cwiseMin(torque_limit).cwiseMax(-torque_limit);
    if (clamped) *clamped = (out.array() != sum.array()).any();
    return out;
}

JointVec apply_ee_wrench(const JointVec& f_out, const ResidualCommand& cmd, const JointVec& q,
                         const ArmParams& params, bool* clamped) {
    check_tag(cmd, ResidualMode::EEWrench, 3);
    const JacMat jac = jacobian(q, params);
    JointVec sum = f_out + JointVec(jac.transpose() * Vec3(cmd.payload));
    JointVec out = sum.cwiseMin(params.torque_limit).cwiseMax(-params.torque_limit);
    if (clamped) *clamped = (out.array() != sum.array()).any();
    return out;
}

JointState apply_joint_pos_feedback(const JointState& o1, const ResidualCommand& cmd) {
    check_tag(cmd, ResidualMode::JointPosFeedback, o1.q.size());
    JointState out = o1;
    out.q += JointVec(cmd.payload);
    return out;
}

JointState apply_ee_pose_feedback(const JointState& o1, const ResidualCommand& cmd,
                                  const ArmParams& params, long* ik_fallbacks) {
    check_tag(cmd, ResidualMode::EEPoseFeedback, 3);
    const PlanarPose ee = forward_kinematics(o1.q, params);
    const PlanarPose target{ee.x + cmd.payload[0], ee.y + cmd.payload[1],
                            wrap_angle(ee.phi + cmd.payload[2])};
    const IkResult ik = inverse_kinematics(target, o1.q, params);
    JointState out = o1;
    if (ik.converged) {
        out.q = ik.q;
    } else if (ik_fallbacks) {
        ++*ik_fallbacks;
    }
    return out;
}

JointState observed_feedback(ResidualMode mode, const JointState& o1, const ResidualCommand* cmd,
                             bool rl_gated, const ArmParams& params, long* ik_fallbacks) {
    if (cmd == nullptr || !rl_gated) return o1;
    switch (mode) {
        case ResidualMode::JointPosFeedback: return apply_joint_pos_feedback(o1, *cmd);
        case ResidualMode::EEPoseFeedback:
            return apply_ee_pose_feedback(o1, *cmd, params, ik_fallbacks);
        case ResidualMode::Hybrid: {
            ResidualCommand fb{ResidualMode::JointPosFeedback, cmd->feedback_half()};
            return apply_joint_pos_feedback(o1, fb);
        }
        default: return o1;
    }
}

}  // namespace pegrl
