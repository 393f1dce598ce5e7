#pragma once

#include "pegrl/arm.hpp"
#include "pegrl/contact.hpp"

namespace pegrl {

enum class Phase {
    MoveToPreInsert,
    FindContact,
    SearchHole,
    HybridForceAlign,
    Insertion,
    Recovery,
};

const char* phase_name(Phase p);

struct ImpedanceGains {
    JointVec kp;  // N m / rad
    JointVec kd;  // N m s / rad

    static ImpedanceGains defaults(int n) {
        return {JointVec::Constant(n, 60.0), JointVec::Constant(n, 8.0)};
    }
};

struct ControllerSetpoint {
    JointVec q_set;
    PlanarWrench ff_wrench;
    bool oscillate = false;  // sinusoidal overlay, Insertion only
    double osc_amplitude = 0.0;
    double osc_hz = 0.0;
};

struct MachineConfig {
    // per-state tick budgets (1 ms ticks)
    int budget_move = 1500;
    int budget_find = 1000;
    int budget_search = 2000;
    int budget_align = 500;
    int budget_insert = 185;

    double pre_insert_height = 0.03;   // m above the nominal mouth
    double pre_insert_offset = 0.0;    // m lateral approach offset from the mouth
    double pre_insert_tilt = 0.2;      // rad from vertical
    double move_ramp_s = 0.6;          // set-point ramp duration
    double move_pos_tol = 0.025;       // coarse success tolerance
    double move_ori_tol = 0.3;
    double settle_speed = 0.012;       // m/s TCP speed for settle checks
    double descend_speed = 0.08;       // m/s
    double search_amplitude = 0.010;   // m, local dither around the touch point
    double search_period_s = 0.5;
    double drop_threshold = 0.002;     // m below the touch height
    double down_force = 5.0;           // N, search/align/insert
    double seek_speed = 0.1;           // m/s, lateral seek toward the near wall
    double wedge_bias = 0.0008;        // m, keeps the corner pressed on the wall
    double align_depth = 0.008;        // m, wedge depth below the touch height
    double align_rate = 2.0;           // rad/s
    double align_tol = 0.05;           // rad
    double insert_osc_amplitude = 2.0; // N
    double insert_osc_hz = 8.0;
    double success_epsilon = 0.005;    // m, observed insertion check
    double strict_threshold = 0.005;   // m, exit-pose deviation
    int buffer_steps = 0;
    bool strict_condition = false;
    int ticks_per_period = 25;         // 40 Hz boundaries on a 1 kHz tick
};

struct MachineState {
    Phase phase = Phase::MoveToPreInsert;
    int entry_tick = 0;

    // captured at state entries (all from observed feedback)
    JointVec q_ramp_start;
    JointVec q_move_target;
    PlanarPose pre_insert_pose;
    bool have_move_target = false;
    double find_x = 0.0;
    double find_y = 0.0;
    double find_phi = 0.0;
    double touch_x = 0.0;
    double touch_y = 0.0;
    double surface_y = 0.0;       // best estimate of the surface height
    bool entered_mouth = false;   // first contact was already inside the mouth
    PlanarPose align_pose;
    int align_stage = 0;          // 0 seek the near wall, 1 wedge-rotate upright
    int wedge_tick = 0;
    Vec2 wedge_anchor{0.0, 0.0};  // leading-corner position at wall contact
    PlanarPose insert_pose;
    JointVec last_q_set;

    // buffer-step bookkeeping (MoveToPreInsert diagnostic)
    bool suc_latched = false;
    int suc_tick = 0;
    int exit_tick = 0;
    int buffer_from = 0;

    bool error = false;     // C_err observed
    bool finished = false;  // insertion sequence finished (observed)

    bool terminal() const { return phase == Phase::Recovery; }
};

// The black-box prior controller f: joint-space impedance law plus the
// five-state insertion machine. Everything it consumes is the (possibly
// residual-modified) feedback o1; contact flags come from force sensing.
class PriorController {
  public:
    PriorController(const ArmParams& arm, const HoleGeometry& geometry,
                    const ImpedanceGains& gains, const MachineConfig& cfg)
        : arm_(arm), geometry_(geometry), gains_(gains), cfg_(cfg) {}

    const MachineConfig& config() const { return cfg_; }
    const ImpedanceGains& gains() const { return gains_; }

    MachineState fresh_machine(const JointState& observed, int tick) const;

    // Advances the state machine one 40 Hz boundary and emits the set-point
    // held for the next period. Transitions follow C_suc; timeouts and strict
    // exit-pose violations go to Recovery. Conditions are evaluated on the
    // (possibly residual-modified) feedback of the period that just ran; when
    // a transition lands in a state where the residual is not gated in, that
    // state's entry references come from the raw feedback, since no
    // modification applies there.
    ControllerSetpoint machine_step(MachineState& machine, const JointState& observed,
                                    const ContactFlags& flags, const PlanarPose& tcp,
                                    int tick) const {
        return machine_step(machine, observed, flags, tcp, observed, tcp, tick);
    }
    ControllerSetpoint machine_step(MachineState& machine, const JointState& observed,
                                    const ContactFlags& flags, const PlanarPose& tcp,
                                    const JointState& raw, const PlanarPose& tcp_raw,
                                    int tick) const;

    // tau = kp (q_set - q) - kd v + J^T (ff + oscillation), clamped.
    JointVec impedance_torque(const ControllerSetpoint& setpoint, const JointState& observed,
                              int tick) const;

    // True iff the RL residual may act in this machine state.
    bool rl_gate(Phase phase) const;

    // True during the final buffer_steps ticks of the diagnostic state; while
    // true, action-side residuals are suppressed so the controller can react
    // to the feedback it sees without fresh policy updates.
    bool buffer_phase(const MachineState& machine, int tick) const;

    // The diagnostic state can be RL-gated explicitly (default off).
    void set_gated(Phase phase, bool gated);

    JointVec home_q() const;
    void set_home_q(const JointVec& q) { home_q_ = q; }

  private:
    ControllerSetpoint setpoint_for(const MachineState& machine, const JointState& observed,
                                    int tick) const;
    void enter(MachineState& machine, Phase phase, const JointState& observed,
               const PlanarPose& tcp, int tick) const;

    ArmParams arm_;
    HoleGeometry geometry_;
    ImpedanceGains gains_;
    MachineConfig cfg_;
    JointVec home_q_;
    bool gate_move_ = false;
    bool gate_find_ = false;
    bool gate_search_ = true;
    bool gate_align_ = false;
    bool gate_insert_ = true;
};

}  // namespace pegrl
