#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pegrl/controller.hpp"
#include "pegrl/residual.hpp"
#include "pegrl/rng.hpp"

#include <cmath>

using namespace pegrl;

namespace {

JointVec jv(std::initializer_list<double> values) {
    JointVec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

Eigen::VectorXd xv(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("action dimensions per mode") {
    CHECK(action_dim(ResidualMode::None, 3) == 0);
    CHECK(action_dim(ResidualMode::JointEffort, 3) == 3);
    CHECK(action_dim(ResidualMode::EEWrench, 3) == 3);
    CHECK(action_dim(ResidualMode::JointPosFeedback, 4) == 4);
    CHECK(action_dim(ResidualMode::EEPoseFeedback, 4) == 3);
    CHECK(action_dim(ResidualMode::Hybrid, 3) == 6);
}

TEST_CASE("bounds respected for adversarial raw outputs") {
    const ResidualBounds bounds;
    Rng rng(3);
    const ResidualMode modes[] = {ResidualMode::JointEffort, ResidualMode::EEWrench,
                                  ResidualMode::JointPosFeedback, ResidualMode::EEPoseFeedback,
                                  ResidualMode::Hybrid};
    for (const ResidualMode mode : modes) {
        const int d = action_dim(mode, 3);
        const Eigen::VectorXd scale = bounds.scale(mode, 3);
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd raw(d);
            for (int i = 0; i < d; ++i) {
                const double u = rng.uniform();
                raw[i] = u < 0.1 ? 1e300 : (u < 0.2 ? -1e300 : rng.normal(0.0, 50.0));
            }
            const ResidualCommand cmd = ResidualCommand::from_raw(mode, raw, 3, bounds);
            for (int i = 0; i < d; ++i) CHECK(std::abs(cmd.payload[i]) <= scale[i] + 1e-15);
        }
    }
}

TEST_CASE("joint effort superposition") {
    const ArmParams params = ArmParams::defaults(3);
    SUBCASE("zero command reduces to the controller output") {
        const JointVec f = jv({1.2, -0.4, 0.9});
        const ResidualCommand cmd = ResidualCommand::zero(ResidualMode::JointEffort, 3);
        const JointVec out = apply_joint_effort(f, cmd, params.torque_limit);
        CHECK(out == f);
    }
    SUBCASE("componentwise sum") {
        const JointVec f = jv({1.0, 1.0, 1.0});
        ResidualCommand cmd{ResidualMode::JointEffort, xv({0.5, -0.5, 0.0})};
        const JointVec out = apply_joint_effort(f, cmd, params.torque_limit);
        CHECK(out[0] == 1.5);
        CHECK(out[1] == 0.5);
        CHECK(out[2] == 1.0);
    }
    SUBCASE("clamp at the plant limit records the event") {
        const JointVec f = jv({49.5, 0.0, 0.0});
        ResidualCommand cmd{ResidualMode::JointEffort, xv({2.0, 0.0, 0.0})};
        bool clamped = false;
        const JointVec out = apply_joint_effort(f, cmd, params.torque_limit, &clamped);
        CHECK(out[0] == 50.0);
        CHECK(clamped);
    }
    SUBCASE("wrong tag raises a mode error") {
        ResidualCommand cmd{ResidualMode::EEWrench, xv({0, 0, 0})};
        CHECK_THROWS_AS(apply_joint_effort(jv({0, 0, 0}), cmd, params.torque_limit), ModeError);
    }
}

TEST_CASE("end-effector wrench residual") {
    const ArmParams params = ArmParams::defaults(3);
    const JointVec q = jv({0.3, -0.5, 0.8});
    SUBCASE("zero command is identity") {
        const JointVec f = jv({0.5, 0.5, 0.5});
        const ResidualCommand cmd = ResidualCommand::zero(ResidualMode::EEWrench, 3);
        CHECK(apply_ee_wrench(f, cmd, q, params) == f);
    }
    SUBCASE("duality: mapped wrench recovered through the damped pseudo-inverse") {
        const JointVec f = JointVec::Zero(3);
        ResidualCommand cmd{ResidualMode::EEWrench, xv({1.0, 0.0, 0.0})};
        const JointVec out = apply_ee_wrench(f, cmd, q, params);
        const JacMat jac = jacobian(q, params);
        const Vec3 recovered = damped_pinv(jac, 1e-6).transpose() * out;
        CHECK((recovered - Vec3(1, 0, 0)).norm() < 1e-4);
    }
    SUBCASE("added torque bounded by the wrench magnitude times the Jacobian norm") {
        Rng rng(19);
        for (int trial = 0; trial < 100; ++trial) {
            JointVec qq(3);
            for (int i = 0; i < 3; ++i) qq[i] = rng.uniform(-2.8, 2.8);
            ResidualCommand cmd{ResidualMode::EEWrench,
                                xv({rng.normal(), rng.normal(), rng.normal()})};
            const JointVec out = apply_ee_wrench(JointVec::Zero(3), cmd, qq, params);
            const JacMat jac = jacobian(qq, params);
            CHECK(out.allFinite());
            CHECK(out.norm() <=
                  jac.norm() * Vec3(cmd.payload).norm() + 1e-12);
        }
    }
}

TEST_CASE("joint position feedback residual") {
    SUBCASE("zero command leaves the state untouched") {
        JointState o1 = JointState::zero(3);
        o1.q = jv({0.1, 0.2, 0.3});
        const ResidualCommand cmd = ResidualCommand::zero(ResidualMode::JointPosFeedback, 3);
        const JointState out = apply_joint_pos_feedback(o1, cmd);
        CHECK(out.q == o1.q);
        CHECK(out.v == o1.v);
        CHECK(out.tau_ext == o1.tau_ext);
    }
    SUBCASE("PD torque shifts linearly with the feedback offset") {
        const ArmParams params = ArmParams::defaults(3);
        const ImpedanceGains gains = ImpedanceGains::defaults(3);
        JointState o1 = JointState::zero(3);
        o1.q = jv({0.2, 0.1, -0.1});
        ResidualCommand cmd{ResidualMode::JointPosFeedback, xv({0.05, 0.0, 0.0})};
        const JointState mod = apply_joint_pos_feedback(o1, cmd);
        // pure PD part: kp (q_set - q) with q_set = o1.q
        const JointVec before = gains.kp.cwiseProduct(o1.q - o1.q);
        const JointVec after = gains.kp.cwiseProduct(o1.q - mod.q);
        CHECK((after - before)[0] == doctest::Approx(-gains.kp[0] * 0.05).epsilon(1e-12));
    }
    SUBCASE("velocity and external torque stay bit-identical") {
        Rng rng(23);
        for (int trial = 0; trial < 50; ++trial) {
            JointState o1 = JointState::zero(3);
            for (int i = 0; i < 3; ++i) {
                o1.q[i] = rng.normal();
                o1.v[i] = rng.normal();
                o1.tau_ext[i] = rng.normal();
            }
            ResidualCommand cmd{ResidualMode::JointPosFeedback,
                                xv({rng.normal(), rng.normal(), rng.normal()})};
            const JointState out = apply_joint_pos_feedback(o1, cmd);
            CHECK(out.v == o1.v);
            CHECK(out.tau_ext == o1.tau_ext);
        }
    }
}

TEST_CASE("end-effector pose feedback residual") {
    const ArmParams params = ArmParams::defaults(3);
    JointState o1 = JointState::zero(3);
    o1.q = jv({0.4, -0.8, 0.6});
    SUBCASE("zero command is the IK fixed point") {
        const ResidualCommand cmd = ResidualCommand::zero(ResidualMode::EEPoseFeedback, 3);
        const JointState out = apply_ee_pose_feedback(o1, cmd, params);
        CHECK(out.q == o1.q);
    }
    SUBCASE("small pose delta moves the virtual pose by exactly that delta") {
        ResidualCommand cmd{ResidualMode::EEPoseFeedback, xv({0.01, 0.0, 0.0})};
        const JointState out = apply_ee_pose_feedback(o1, cmd, params);
        const PlanarPose before = forward_kinematics(o1.q, params);
        const PlanarPose after = forward_kinematics(out.q, params);
        CHECK(after.x - before.x == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(after.y - before.y == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("reach-boundary command falls back to the raw feedback") {
        JointState stretched = JointState::zero(3);
        stretched.q = jv({0.0, 0.001, 0.001});  // nearly straight: at the reach boundary
        ResidualCommand cmd{ResidualMode::EEPoseFeedback, xv({0.01, 0.0, 0.0})};
        long fallbacks = 0;
        const JointState out = apply_ee_pose_feedback(stretched, cmd, params, &fallbacks);
        CHECK(out.q == stretched.q);
        CHECK(fallbacks == 1);
    }
}

TEST_CASE("hybrid equals feedback followed by effort") {
    const ArmParams params = ArmParams::defaults(3);
    const ImpedanceGains gains = ImpedanceGains::defaults(3);
    Rng rng(29);
    auto f = [&](const JointState& o1, int tick) -> JointVec {
        JointVec target = jv({0.3, 0.2, 0.1});
        return gains.kp.cwiseProduct(target - o1.q) - gains.kd.cwiseProduct(o1.v);
    };
    for (int trial = 0; trial < 100; ++trial) {
        JointState o1 = JointState::zero(3);
        for (int i = 0; i < 3; ++i) {
            o1.q[i] = rng.normal(0.0, 0.5);
            o1.v[i] = rng.normal(0.0, 0.5);
        }
        Eigen::VectorXd payload(6);
        for (int i = 0; i < 6; ++i) payload[i] = rng.normal(0.0, 0.3);
        ResidualCommand hybrid{ResidualMode::Hybrid, payload};

        const JointVec via_compose = compose_step(ResidualMode::Hybrid, o1, f, &hybrid, true,
                                                  false, 0, params);
        ResidualCommand fb{ResidualMode::JointPosFeedback, hybrid.feedback_half()};
        ResidualCommand eff{ResidualMode::JointEffort, hybrid.torque_half()};
        const JointState modified = apply_joint_pos_feedback(o1, fb);
        const JointVec expected =
            apply_joint_effort(f(modified, 0), eff, params.torque_limit);
        CHECK(via_compose == expected);
    }
}

TEST_CASE("compose dispatch honors gating, buffering and tags") {
    const ArmParams params = ArmParams::defaults(3);
    auto f = [&](const JointState& o1, int) -> JointVec { return jv({1.0, 2.0, 3.0}) - o1.q; };
    JointState o1 = JointState::zero(3);
    o1.q = jv({0.1, 0.1, 0.1});
    const JointVec bare = f(o1, 0);

    SUBCASE("mode none ignores any command") {
        ResidualCommand cmd{ResidualMode::JointEffort, xv({1, 1, 1})};
        CHECK(compose_step(ResidualMode::None, o1, f, &cmd, true, false, 0, params) == bare);
    }
    SUBCASE("not gated falls back to the bare controller") {
        ResidualCommand cmd{ResidualMode::JointEffort, xv({1, 1, 1})};
        CHECK(compose_step(ResidualMode::JointEffort, o1, f, &cmd, false, false, 0, params) ==
              bare);
    }
    SUBCASE("buffered suppresses the action-side residual exactly") {
        ResidualCommand cmd{ResidualMode::JointEffort, xv({1, 1, 1})};
        CHECK(compose_step(ResidualMode::JointEffort, o1, f, &cmd, true, true, 0, params) ==
              bare);
    }
    SUBCASE("buffered keeps the feedback-side modification") {
        ResidualCommand cmd{ResidualMode::JointPosFeedback, xv({0.05, 0, 0})};
        const JointVec buffered =
            compose_step(ResidualMode::JointPosFeedback, o1, f, &cmd, true, true, 0, params);
        const JointVec active =
            compose_step(ResidualMode::JointPosFeedback, o1, f, &cmd, true, false, 0, params);
        CHECK(buffered == active);
        CHECK(buffered != bare);
    }
    SUBCASE("tag mismatch raises") {
        ResidualCommand cmd{ResidualMode::JointEffort, xv({1, 1, 1})};
        CHECK_THROWS_AS(
            compose_step(ResidualMode::EEWrench, o1, f, &cmd, true, false, 0, params),
            ModeError);
    }
    SUBCASE("feedback purity: torque equals f of the modified state, nothing added") {
        ResidualCommand cmd{ResidualMode::JointPosFeedback, xv({0.02, -0.01, 0.03})};
        const JointVec out =
            compose_step(ResidualMode::JointPosFeedback, o1, f, &cmd, true, false, 0, params);
        const JointVec expected = f(apply_joint_pos_feedback(o1, cmd), 0);
        CHECK(out == expected);
    }
}

TEST_CASE("zero commands across all modes reproduce the bare controller bitwise") {
    const ArmParams params = ArmParams::defaults(3);
    auto f = [&](const JointState& o1, int tick) -> JointVec {
        return jv({0.7, -0.2, 0.4}) - o1.q + 0.1 * std::sin(tick * 0.01) * jv({1, 1, 1});
    };
    Rng rng(31);
    const ResidualMode modes[] = {ResidualMode::JointEffort, ResidualMode::EEWrench,
                                  ResidualMode::JointPosFeedback, ResidualMode::EEPoseFeedback,
                                  ResidualMode::Hybrid};
    for (int trial = 0; trial < 20; ++trial) {
        JointState o1 = JointState::zero(3);
        for (int i = 0; i < 3; ++i) {
            o1.q[i] = rng.normal(0.0, 0.6);
            o1.v[i] = rng.normal(0.0, 0.2);
        }
        const int tick = trial * 7;
        const JointVec bare = compose_step(ResidualMode::None, o1, f, nullptr, false, false,
                                           tick, params);
        for (const ResidualMode mode : modes) {
            const ResidualCommand cmd = ResidualCommand::zero(mode, 3);
            const JointVec out = compose_step(mode, o1, f, &cmd, true, false, tick, params);
            CHECK(out == bare);
        }
    }
}
