#pragma once

#include "pegrl/contact.hpp"
#include "pegrl/controller.hpp"
#include "pegrl/residual.hpp"
#include "pegrl/rng.hpp"

#include <vector>

namespace pegrl {

struct EnvConfig {
    ArmParams arm = ArmParams::defaults(3);
    HoleGeometry geometry;
    ContactParams contact;
    ImpedanceGains gains = ImpedanceGains::defaults(3);
    MachineConfig machine;
    ResidualMode mode = ResidualMode::None;
    ResidualBounds bounds;
    JointVec home_q;  // empty -> controller default
    double dt = 1e-3;
    int episode_cap_ticks = 6000;
    double reward_epsilon = 0.005;
    double obs_noise_std = 0.0;
    bool scratch_mode = false;           // gated states run on raw policy torques
    double scratch_torque_bound = 10.0;  // N m
    // Feedback residuals track their commanded value at a bounded rate: the
    // controller sees a smoothly moving virtual state, never a step.
    double fb_slew_joint = 0.15;         // rad/s per joint
    Vec3 fb_slew_pose{0.05, 0.05, 0.15}; // m/s, m/s, rad/s
    bool gate_move = false;
    bool gate_find = false;
    bool gate_search = true;
    bool gate_align = false;
    bool gate_insert = true;
};

struct Observation {
    Vec2 rel_pos{0.0, 0.0};  // TCP displacement since first contact
    double rel_phi = 0.0;
    PlanarWrench wrench;

    static constexpr int kDim = 6;
    Eigen::Matrix<double, 6, 1> vec() const {
        Eigen::Matrix<double, 6, 1> v;
        v << rel_pos.x(), rel_pos.y(), rel_phi, wrench.fx, wrench.fy, wrench.tz;
        return v;
    }
};

struct Transition {
    Observation obs;
    int reward = 0;
    bool done = false;
    bool success = false;
    bool machine_error = false;
    bool rl_gated = false;  // the period just run accepted a residual
    Phase phase = Phase::MoveToPreInsert;         // phase for the next period
    Phase phase_during = Phase::MoveToPreInsert;  // phase the period ran in
    ContactFlags flags;
    PlanarPose tcp;  // true pose
    int tick = 0;
};

// One peg-in-hole episode machine. Owns its RNG stream; many instances may
// step concurrently as long as each is driven by a single thread.
class PegInHoleEnv {
  public:
    PegInHoleEnv(const EnvConfig& cfg, Rng rng);

    Observation reset(double pos_std, double ori_std);
    Transition step(const ResidualCommand* cmd);

    bool done() const { return done_; }
    int tick() const { return tick_; }
    Phase phase() const { return machine_.phase; }
    bool next_gated() const { return ctrl_.rl_gate(machine_.phase); }
    PlanarPose true_tcp() const { return forward_kinematics(state_.q, cfg_.arm); }
    const HoleSample& hole() const { return hole_; }
    Vec2 goal() const { return goal_; }
    const MachineState& machine() const { return machine_; }
    const PriorController& controller() const { return ctrl_; }
    const EnvConfig& config() const { return cfg_; }
    const JointState& plant_state() const { return state_; }

    long ik_fallbacks() const { return ik_fallbacks_; }
    long clamp_events() const { return clamp_events_; }
    int gated_steps() const { return gated_steps_; }

    // Test hook: per-tick commanded torques for the current episode.
    std::vector<JointVec>* torque_trace = nullptr;

    // Test/diagnostic hook: replace the sampled hole after reset.
    void set_hole(const HoleSample& hole) {
        hole_ = hole;
        goal_ = goal_point(cfg_.geometry, hole_);
    }

  private:
    Observation make_observation();

    EnvConfig cfg_;
    PriorController ctrl_;
    Rng rng_;
    JointState state_;
    MachineState machine_;
    ControllerSetpoint setpoint_;
    Eigen::VectorXd fb_prev_;     // feedback payload carried across periods
    ResidualCommand tick_cmd_;    // scratch space for the slewed command
    HoleSample hole_;
    Vec2 goal_{0.0, 0.0};
    ContactResult last_contact_;
    bool has_anchor_ = false;
    Vec2 anchor_{0.0, 0.0};
    int tick_ = 0;
    bool done_ = false;
    bool started_ = false;
    long ik_fallbacks_ = 0;
    long clamp_events_ = 0;
    int gated_steps_ = 0;
};

}  // namespace pegrl
