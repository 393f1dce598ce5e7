#pragma once

#include "pegrl/arm.hpp"
#include "pegrl/rng.hpp"

namespace pegrl {

// Plate with a rectangular slot. The mouth center is the reference point:
// position uncertainty translates it, orientation uncertainty rotates the
// whole plate about it, so the mouth center is invariant under tilt.
struct HoleGeometry {
    double hole_width = 0.0258;   // m
    double peg_width = 0.025;     // m
    double peg_length = 0.070;    // m
    double hole_depth = 0.050;    // m
    double surface_y = -0.30;     // m, nominal surface line
    PlanarPose nominal_hole_pose{0.42, -0.30, 0.0};  // mouth center + wall orientation

    void validate() const {
        if (hole_width <= peg_width) throw ConfigError("geometry: hole_width must exceed peg_width");
        if (peg_length <= hole_depth) throw ConfigError("geometry: peg_length must exceed hole_depth");
        if (nominal_hole_pose.y != surface_y)
            throw ConfigError("geometry: nominal hole pose must sit on the surface line");
    }
};

struct HoleSample {
    PlanarPose true_pose;     // sampled mouth center + plate tilt
    PlanarPose nominal_pose;  // what the controller believes
};

struct ContactParams {
    double k_c = 1e4;         // N/m, penalty stiffness
    double d_c = 50.0;        // N s/m, penalty damping
    double mu = 0.3;          // kinetic friction coefficient
    double mu_static = 0.45;  // sticking friction below v_stick
    double v_stick = 0.001;   // m/s, stick-slip crossover
    double k_f = 2e4;         // N s/m, friction regularization slope
};

struct ContactFlags {
    bool surface = false;
    bool left_wall = false;
    bool right_wall = false;
    bool bottom = false;

    bool any() const { return surface || left_wall || right_wall || bottom; }
    bool wall() const { return left_wall || right_wall; }
};

// True-plate frame helper: x along the plate tangent, y along the plate normal,
// origin at the mouth center.
struct PlateFrame {
    Vec2 mouth;
    Vec2 tangent;
    Vec2 normal;

    Vec2 to_plate(const Vec2& world) const {
        const Vec2 d = world - mouth;
        return {d.dot(tangent), d.dot(normal)};
    }
    Vec2 to_world_dir(const Vec2& plate_dir) const {
        return plate_dir.x() * tangent + plate_dir.y() * normal;
    }
};

PlateFrame plate_frame(const HoleSample& hole);

// Goal for the sparse reward: center of the hole bottom.
Vec2 goal_point(const HoleGeometry& geometry, const HoleSample& hole);

HoleSample sample_hole(double pos_std, double ori_std, const HoleGeometry& geometry, Rng& rng);

// Penalty contact between the peg (two tip corners, two side lines) and the
// plate (surface, walls, bottom, mouth edges). Returns the wrench on the peg
// resolved at the TCP (peg tip center).
struct ContactResult {
    PlanarWrench wrench;
    ContactFlags flags;
};

ContactResult contact_wrench(const PlanarPose& tcp_pose, const HoleGeometry& geometry,
                             const HoleSample& hole, const Vec3& tcp_vel,
                             const ContactParams& params);

// r = 1 iff the TCP is strictly within epsilon of the goal (position only).
int reward(const PlanarPose& tcp, const Vec2& goal, double epsilon);

}  // namespace pegrl
