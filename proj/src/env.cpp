#include "pegrl/env.hpp"

namespace pegrl {

namespace {
PriorController make_controller(const EnvConfig& cfg) {
    PriorController ctrl(cfg.arm, cfg.geometry, cfg.gains, cfg.machine);
    ctrl.set_gated(Phase::MoveToPreInsert, cfg.gate_move);
    ctrl.set_gated(Phase::FindContact, cfg.gate_find);
    ctrl.set_gated(Phase::SearchHole, cfg.gate_search);
    ctrl.set_gated(Phase::HybridForceAlign, cfg.gate_align);
    ctrl.set_gated(Phase::Insertion, cfg.gate_insert);
    if (cfg.home_q.size() == cfg.arm.n_joints) ctrl.set_home_q(cfg.home_q);
    return ctrl;
}
}  // namespace

PegInHoleEnv::PegInHoleEnv(const EnvConfig& cfg, Rng rng)
    : cfg_(cfg), ctrl_(make_controller(cfg)), rng_(rng) {
    cfg_.arm.validate();
    cfg_.geometry.validate();
}

namespace {
// Feedback payload length per mode; 0 when the mode has no feedback side.
int feedback_dim(ResidualMode mode, int n) {
    switch (mode) {
        case ResidualMode::JointPosFeedback: return n;
        case ResidualMode::EEPoseFeedback: return 3;
        case ResidualMode::Hybrid: return n;
        default: return 0;
    }
}
}  // namespace

Observation PegInHoleEnv::reset(double pos_std, double ori_std) {
    hole_ = sample_hole(pos_std, ori_std, cfg_.geometry, rng_);
    goal_ = goal_point(cfg_.geometry, hole_);
    state_ = JointState::zero(cfg_.arm.n_joints);
    state_.q = ctrl_.home_q();
    fb_prev_ = Eigen::VectorXd::Zero(feedback_dim(cfg_.mode, cfg_.arm.n_joints));
    tick_ = 0;
    done_ = false;
    started_ = true;
    has_anchor_ = false;
    ik_fallbacks_ = 0;
    clamp_events_ = 0;
    gated_steps_ = 0;
    last_contact_ = ContactResult{};
    machine_ = ctrl_.fresh_machine(state_, 0);
    setpoint_ = ctrl_.machine_step(machine_, state_, ContactFlags{}, true_tcp(), 0);
    return make_observation();
}

Transition PegInHoleEnv::step(const ResidualCommand* cmd) {
    if (!started_) throw UsageError("env: step before reset");
    if (done_) throw UsageError("env: step on a done episode");
    if (cmd != nullptr && !cfg_.scratch_mode && cmd->mode != cfg_.mode)
        throw ModeError("env: command tag does not match configured mode");

    const Phase running_phase = machine_.phase;
    const bool gated = ctrl_.rl_gate(running_phase);
    const bool acting = gated && cmd != nullptr;
    if (acting) ++gated_steps_;

    Transition tr;
    tr.phase_during = running_phase;
    tr.rl_gated = acting;

    const int period = cfg_.machine.ticks_per_period;
    auto f = [&](const JointState& o1, int tk) {
        return ctrl_.impedance_torque(setpoint_, o1, tk);
    };

    // Feedback-side payloads track their commanded value at a bounded slew
    // rate: the controller sees a smoothly moving virtual state, while
    // action-side residuals apply as held steps. Square-wave content
    // survives only on the action side.
    const int fb_dim = feedback_dim(cfg_.scratch_mode ? ResidualMode::None : cfg_.mode,
                                    cfg_.arm.n_joints);
    Eigen::VectorXd fb_target;
    Eigen::VectorXd fb_rate;
    if (fb_dim > 0) {
        if (acting) {
            fb_target = cfg_.mode == ResidualMode::Hybrid ? cmd->feedback_half()
                                                          : cmd->payload;
            fb_rate = cfg_.mode == ResidualMode::EEPoseFeedback
                          ? Eigen::VectorXd(cfg_.fb_slew_pose * cfg_.dt)
                          : Eigen::VectorXd::Constant(fb_dim, cfg_.fb_slew_joint * cfg_.dt);
            tick_cmd_.mode = cfg_.mode;
            tick_cmd_.payload = cmd->payload;
        } else {
            fb_prev_.setZero();
        }
    }

    for (int k = 0; k < period; ++k) {
        const int t = tick_ + k;
        const bool buffered = ctrl_.buffer_phase(machine_, t);
        const ResidualCommand* effective = acting ? cmd : nullptr;
        if (acting && fb_dim > 0) {
            fb_prev_ += (fb_target - fb_prev_).cwiseMin(fb_rate).cwiseMax(-fb_rate);
            if (cfg_.mode == ResidualMode::Hybrid)
                tick_cmd_.payload.tail(fb_dim) = fb_prev_;
            else
                tick_cmd_.payload = fb_prev_;
            effective = &tick_cmd_;
        }
        JointVec tau;
        bool clamped = false;
        if (cfg_.scratch_mode && acting && !buffered) {
            tau = JointVec(cmd->payload)
                      .cwiseMin(JointVec::Constant(cfg_.arm.n_joints, cfg_.scratch_torque_bound))
                      .cwiseMax(JointVec::Constant(cfg_.arm.n_joints, -cfg_.scratch_torque_bound));
        } else {
            tau = compose_step(cfg_.scratch_mode ? ResidualMode::None : cfg_.mode, state_, f,
                               effective, acting, buffered, t, cfg_.arm, &ik_fallbacks_,
                               &clamped);
        }
        if (clamped) ++clamp_events_;

        const PlanarPose pose = true_tcp();
        const Vec3 vel = jacobian(state_.q, cfg_.arm) * state_.v;
        last_contact_ = contact_wrench(pose, cfg_.geometry, hole_, vel, cfg_.contact);
        if (!has_anchor_ && last_contact_.flags.any()) {
            has_anchor_ = true;
            anchor_ = pose.position();
        }
        if (torque_trace) torque_trace->push_back(tau);
        try {
            state_ = step_dynamics(state_, tau, last_contact_.wrench, cfg_.dt, cfg_.arm);
        } catch (const PlantError&) {
            done_ = true;
            tr.machine_error = true;
            tr.done = true;
            tr.tcp = pose;
            tr.tick = t;
            tr.obs = make_observation();
            return tr;
        }
    }
    tick_ += period;

    // Boundary: the machine consumes the same modified feedback the impedance
    // law saw on the last tick of the period.
    const ResidualCommand* boundary_cmd = acting ? cmd : nullptr;
    if (acting && fb_dim > 0) boundary_cmd = &tick_cmd_;
    const JointState o1 = observed_feedback(cfg_.scratch_mode ? ResidualMode::None : cfg_.mode,
                                            state_, boundary_cmd, acting, cfg_.arm,
                                            &ik_fallbacks_);
    const PlanarPose tcp_obs = forward_kinematics(o1.q, cfg_.arm);
    setpoint_ = ctrl_.machine_step(machine_, o1, last_contact_.flags, tcp_obs, state_,
                                   true_tcp(), tick_);

    const PlanarPose tcp_true = true_tcp();
    tr.reward = reward(tcp_true, goal_, cfg_.reward_epsilon);
    tr.tcp = tcp_true;
    tr.flags = last_contact_.flags;
    tr.tick = tick_;
    tr.phase = machine_.phase;
    if (tr.reward == 1) {
        tr.success = true;
        done_ = true;
    } else if (machine_.terminal()) {
        tr.machine_error = machine_.error;
        done_ = true;
    } else if (tick_ >= cfg_.episode_cap_ticks) {
        done_ = true;
    }
    tr.done = done_;
    tr.obs = make_observation();
    return tr;
}

Observation PegInHoleEnv::make_observation() {
    Observation obs;
    const PlanarPose tcp = true_tcp();
    if (has_anchor_) obs.rel_pos = tcp.position() - anchor_;
    obs.rel_phi = tcp.phi;
    obs.wrench = last_contact_.wrench;
    if (cfg_.obs_noise_std > 0.0) {
        obs.rel_pos.x() += rng_.normal(0.0, cfg_.obs_noise_std);
        obs.rel_pos.y() += rng_.normal(0.0, cfg_.obs_noise_std);
        obs.rel_phi += rng_.normal(0.0, cfg_.obs_noise_std);
        obs.wrench.fx += rng_.normal(0.0, cfg_.obs_noise_std);
        obs.wrench.fy += rng_.normal(0.0, cfg_.obs_noise_std);
        obs.wrench.tz += rng_.normal(0.0, cfg_.obs_noise_std);
    }
    return obs;
}

}  // namespace pegrl
