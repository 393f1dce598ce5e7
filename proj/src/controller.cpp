#include "pegrl/controller.hpp"

#include <cmath>

namespace pegrl {

namespace {
constexpr double kDt = 1e-3;  // 1 kHz controller tick

// Triangle wave with unit amplitude and period 1; starts at 0 rising.
double tri(double phase) {
    phase -= std::floor(phase);
    if (phase < 0.25) return 4.0 * phase;
    if (phase < 0.75) return 2.0 - 4.0 * phase;
    return 4.0 * phase - 4.0;
}
}  // namespace

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::MoveToPreInsert: return "move_to_pre_insert";
        case Phase::FindContact: return "find_contact";
        case Phase::SearchHole: return "search_hole";
        case Phase::HybridForceAlign: return "hybrid_force_align";
        case Phase::Insertion: return "insertion";
        case Phase::Recovery: return "recovery";
    }
    return "?";
}

JointVec PriorController::home_q() const {
    if (home_q_.size() == arm_.n_joints) return home_q_;
    JointVec q = JointVec::Zero(arm_.n_joints);
    q[0] = -0.6;
    q[1] = 1.2;
    q[2] = -0.8;
    return q;
}

void PriorController::set_gated(Phase phase, bool gated) {
    switch (phase) {
        case Phase::MoveToPreInsert: gate_move_ = gated; break;
        case Phase::FindContact: gate_find_ = gated; break;
        case Phase::SearchHole: gate_search_ = gated; break;
        case Phase::HybridForceAlign: gate_align_ = gated; break;
        case Phase::Insertion: gate_insert_ = gated; break;
        case Phase::Recovery: break;
    }
}

bool PriorController::rl_gate(Phase phase) const {
    switch (phase) {
        case Phase::MoveToPreInsert: return gate_move_;
        case Phase::FindContact: return gate_find_;
        case Phase::SearchHole: return gate_search_;
        case Phase::HybridForceAlign: return gate_align_;
        case Phase::Insertion: return gate_insert_;
        case Phase::Recovery: return false;
    }
    return false;
}

bool PriorController::buffer_phase(const MachineState& machine, int tick) const {
    if (cfg_.buffer_steps <= 0) return false;
    if (machine.phase != Phase::MoveToPreInsert || !machine.suc_latched) return false;
    return tick >= machine.buffer_from && tick < machine.exit_tick;
}

MachineState PriorController::fresh_machine(const JointState& observed, int tick) const {
    MachineState m;
    m.surface_y = geometry_.surface_y;
    const PlanarPose tcp = forward_kinematics(observed.q, arm_);
    enter(m, Phase::MoveToPreInsert, observed, tcp, tick);
    return m;
}

void PriorController::enter(MachineState& machine, Phase phase, const JointState& observed,
                            const PlanarPose& tcp, int tick) const {
    machine.phase = phase;
    machine.entry_tick = tick;
    switch (phase) {
        case Phase::MoveToPreInsert: {
            const PlanarPose nominal = geometry_.nominal_hole_pose;
            machine.pre_insert_pose = {nominal.x + cfg_.pre_insert_offset,
                                       nominal.y + cfg_.pre_insert_height,
                                       wrap_angle(-kPi / 2.0 + cfg_.pre_insert_tilt)};
            machine.q_ramp_start = observed.q;
            const IkResult ik = inverse_kinematics(machine.pre_insert_pose, observed.q, arm_);
            machine.q_move_target = ik.converged ? ik.q : observed.q;
            machine.have_move_target = ik.converged;
            machine.last_q_set = observed.q;
            machine.suc_latched = false;
            break;
        }
        case Phase::FindContact:
            machine.find_x = tcp.x;
            machine.find_y = tcp.y;
            machine.find_phi = tcp.phi;
            break;
        case Phase::SearchHole:
            break;
        case Phase::HybridForceAlign:
            machine.align_pose = tcp;
            break;
        case Phase::Insertion:
            // Aim past the believed bottom so the spring still presses when
            // the peg actually bottoms out; contact, not the set-point,
            // terminates the travel.
            machine.insert_pose = {tcp.x,
                                   machine.touch_y - geometry_.hole_depth - 0.008,
                                   wrap_angle(-kPi / 2.0)};
            break;
        case Phase::Recovery:
            break;
    }
}

ControllerSetpoint PriorController::machine_step(MachineState& machine,
                                                 const JointState& observed,
                                                 const ContactFlags& flags,
                                                 const PlanarPose& tcp, const JointState& raw,
                                                 const PlanarPose& tcp_raw, int tick) const {
    const int elapsed = tick - machine.entry_tick;
    auto enter_phase = [&](Phase p) {
        const bool gated = rl_gate(p);
        enter(machine, p, gated ? observed : raw, gated ? tcp : tcp_raw, tick);
    };
    switch (machine.phase) {
        case Phase::MoveToPreInsert: {
            if (!machine.suc_latched) {
                const int ramp_ticks = static_cast<int>(cfg_.move_ramp_s / kDt);
                const Vec3 err = pose_error(machine.pre_insert_pose, tcp);
                const double tcp_speed =
                    (jacobian(observed.q, arm_) * observed.v).head<2>().norm();
                const bool suc = elapsed >= ramp_ticks &&
                                 err.head<2>().norm() < cfg_.move_pos_tol &&
                                 std::abs(err[2]) < cfg_.move_ori_tol &&
                                 tcp_speed < cfg_.settle_speed;
                if (suc) {
                    machine.suc_latched = true;
                    machine.suc_tick = tick;
                    const int period = cfg_.ticks_per_period;
                    const int hold =
                        (cfg_.buffer_steps + period - 1) / period * period;
                    machine.exit_tick = tick + (cfg_.buffer_steps > 0 ? hold : 0);
                    machine.buffer_from = machine.exit_tick - cfg_.buffer_steps;
                } else if (elapsed > cfg_.budget_move) {
                    machine.error = true;
                    enter_phase(Phase::Recovery);
                    break;
                }
            }
            if (machine.suc_latched && tick >= machine.exit_tick) {
                const double deviation =
                    (tcp.position() - machine.pre_insert_pose.position()).norm();
                if (cfg_.strict_condition && deviation > cfg_.strict_threshold) {
                    machine.error = true;
                    enter_phase(Phase::Recovery);
                } else {
                    enter_phase(Phase::FindContact);
                }
            }
            break;
        }
        case Phase::FindContact: {
            if (flags.any()) {
                machine.touch_x = tcp.x;
                machine.touch_y = tcp.y;
                machine.surface_y = flags.surface ? tcp.y : geometry_.surface_y;
                machine.entered_mouth = flags.wall() || flags.bottom;
                enter_phase(Phase::SearchHole);
            } else if (elapsed > cfg_.budget_find) {
                machine.error = true;
                enter_phase(Phase::Recovery);
            }
            break;
        }
        case Phase::SearchHole: {
            // The hole announces itself through force: the pressed peg either
            // catches a wall or loses the surface over the mouth.
            const bool over_mouth = elapsed > 0 && !flags.any();
            if (machine.entered_mouth || flags.wall() || flags.bottom || over_mouth) {
                enter_phase(Phase::HybridForceAlign);
            } else if (elapsed > cfg_.budget_search) {
                machine.error = true;
                enter_phase(Phase::Recovery);
            }
            break;
        }
        case Phase::HybridForceAlign: {
            const double lead = cfg_.pre_insert_tilt >= 0.0 ? -1.0 : 1.0;
            if (machine.align_stage == 0) {
                const bool wall_hit = lead < 0.0 ? flags.left_wall : flags.right_wall;
                if (wall_hit) {
                    const Vec2 nhat{-std::sin(tcp.phi), std::cos(tcp.phi)};
                    machine.wedge_anchor =
                        tcp.position() + lead * (geometry_.peg_width / 2.0) * nhat;
                    machine.align_stage = 1;
                    machine.wedge_tick = tick;
                }
            } else {
                const double ori_err = std::abs(angle_diff(tcp.phi, -kPi / 2.0));
                if (ori_err < cfg_.align_tol) {
                    const double deviation =
                        (tcp.position() - machine.wedge_anchor).norm();
                    if (cfg_.strict_condition && deviation > 4.0 * geometry_.peg_width) {
                        machine.error = true;
                        enter_phase(Phase::Recovery);
                        break;
                    }
                    enter_phase(Phase::Insertion);
                    break;
                }
            }
            if (elapsed > cfg_.budget_align) {
                machine.error = true;
                enter_phase(Phase::Recovery);
            }
            break;
        }
        case Phase::Insertion: {
            // Completion, not proximity: the tip must have stopped at the
            // believed bottom, otherwise a passing descent would end the
            // sequence early.
            const double dist = (tcp.position() - machine.insert_pose.position()).norm();
            const double tcp_speed = (jacobian(observed.q, arm_) * observed.v).head<2>().norm();
            if (dist < cfg_.success_epsilon && tcp_speed < cfg_.settle_speed) {
                machine.finished = true;
                enter_phase(Phase::Recovery);
            } else if (elapsed > cfg_.budget_insert) {
                machine.error = true;
                enter_phase(Phase::Recovery);
            }
            break;
        }
        case Phase::Recovery:
            break;
    }
    ControllerSetpoint sp =
        setpoint_for(machine, rl_gate(machine.phase) ? observed : raw, tick);
    machine.last_q_set = sp.q_set;
    return sp;
}

ControllerSetpoint PriorController::setpoint_for(const MachineState& machine,
                                                 const JointState& observed, int tick) const {
    ControllerSetpoint sp;
    sp.q_set = machine.last_q_set.size() == arm_.n_joints ? machine.last_q_set : observed.q;
    const int elapsed = tick - machine.entry_tick;
    auto track = [&](const PlanarPose& target) {
        const IkResult ik = inverse_kinematics(target, observed.q, arm_);
        if (ik.converged) sp.q_set = ik.q;
    };
    switch (machine.phase) {
        case Phase::MoveToPreInsert: {
            const int ramp_ticks = static_cast<int>(cfg_.move_ramp_s / kDt);
            const double alpha =
                ramp_ticks > 0 ? std::min(1.0, static_cast<double>(elapsed) / ramp_ticks) : 1.0;
            if (machine.have_move_target)
                sp.q_set = machine.q_ramp_start +
                           alpha * (machine.q_move_target - machine.q_ramp_start);
            else
                sp.q_set = machine.q_ramp_start;
            break;
        }
        case Phase::FindContact: {
            const double y = machine.find_y - cfg_.descend_speed * elapsed * kDt;
            track({machine.find_x, y, machine.find_phi});
            break;
        }
        case Phase::SearchHole: {
            const double phase = elapsed * kDt / cfg_.search_period_s;
            const double x = machine.touch_x + cfg_.search_amplitude * tri(phase);
            track({x, machine.touch_y, machine.find_phi});
            sp.ff_wrench = {0.0, -cfg_.down_force, 0.0};
            break;
        }
        case Phase::HybridForceAlign: {
            const double lead = cfg_.pre_insert_tilt >= 0.0 ? -1.0 : 1.0;
            if (machine.align_stage == 0) {
                // Slide the leading corner onto the near wall.
                const double x = machine.align_pose.x + lead * cfg_.seek_speed * elapsed * kDt;
                track({x, machine.align_pose.y, machine.align_pose.phi});
            } else {
                // Rotate about the anchored corner; the wall guides the wedge.
                // The wedge stays shallow: the insertion state does the press.
                const double dphi = angle_diff(-kPi / 2.0, machine.align_pose.phi);
                const double step = cfg_.align_rate * (tick - machine.wedge_tick) * kDt;
                const double phi = wrap_angle(
                    machine.align_pose.phi +
                    (std::abs(dphi) < step ? dphi : (dphi > 0 ? step : -step)));
                const Vec2 nhat{-std::sin(phi), std::cos(phi)};
                Vec2 tip = machine.wedge_anchor - lead * (geometry_.peg_width / 2.0) * nhat +
                           Vec2{lead * cfg_.wedge_bias, 0.0};
                tip.y() = std::max(tip.y(), machine.touch_y - cfg_.align_depth);
                track({tip.x(), tip.y(), phi});
            }
            sp.ff_wrench = {0.0, -cfg_.down_force, 0.0};
            break;
        }
        case Phase::Insertion: {
            track(machine.insert_pose);
            sp.ff_wrench = {0.0, -cfg_.down_force, 0.0};
            sp.oscillate = true;
            sp.osc_amplitude = cfg_.insert_osc_amplitude;
            sp.osc_hz = cfg_.insert_osc_hz;
            break;
        }
        case Phase::Recovery:
            sp.q_set = home_q();
            break;
    }
    return sp;
}

JointVec PriorController::impedance_torque(const ControllerSetpoint& setpoint,
                                           const JointState& observed, int tick) const {
    PlanarWrench ff = setpoint.ff_wrench;
    if (setpoint.oscillate)
        ff.fx += setpoint.osc_amplitude * std::sin(2.0 * kPi * setpoint.osc_hz * tick * kDt);
    const JacMat jac = jacobian(observed.q, arm_);
    JointVec tau = gains_.kp.cwiseProduct(setpoint.q_set - observed.q) -
                   gains_.kd.cwiseProduct(observed.v) + jac.transpose() * ff.vec();
    return tau.cwiseMin(arm_.torque_limit).cwiseMax(-arm_.torque_limit);
}

}  // namespace pegrl
