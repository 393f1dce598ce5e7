#include "pegrl/contact.hpp"

#include <cmath>

namespace pegrl {

PlateFrame plate_frame(const HoleSample& hole) {
    PlateFrame f;
    f.mouth = {hole.true_pose.x, hole.true_pose.y};
    const double th = hole.true_pose.phi;
    f.tangent = {std::cos(th), std::sin(th)};
    f.normal = {-std::sin(th), std::cos(th)};
    return f;
}

Vec2 goal_point(const HoleGeometry& geometry, const HoleSample& hole) {
    const PlateFrame f = plate_frame(hole);
    return f.mouth - geometry.hole_depth * f.normal;
}

HoleSample sample_hole(double pos_std, double ori_std, const HoleGeometry& geometry, Rng& rng) {
    if (pos_std < 0.0 || ori_std < 0.0) throw ConfigError("sample_hole: stds must be >= 0");
    HoleSample s;
    s.nominal_pose = geometry.nominal_hole_pose;
    s.true_pose.x = rng.normal(s.nominal_pose.x, pos_std);
    s.true_pose.y = rng.normal(s.nominal_pose.y, pos_std);
    s.true_pose.phi = wrap_angle(rng.normal(s.nominal_pose.phi, ori_std));
    return s;
}

int reward(const PlanarPose& tcp, const Vec2& goal, double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("reward: epsilon must be > 0");
    return (tcp.position() - goal).norm() < epsilon ? 1 : 0;
}

namespace {

struct Candidate {
    double depth = -1.0;   // penetration, >= 0 when valid
    Vec2 normal;           // plate-frame push-out direction on the peg
    int flag = 0;          // 0 surface, 1 left wall, 2 right wall, 3 bottom
};

// Minimum-translation push-out for a point inside the plate material.
// Plate frame: free space is {eta > 0} plus the cavity {|xi| < hw, eta > -depth}.
bool point_pushout(const Vec2& p, double half_width, double depth, Candidate& out) {
    const double xi = p.x();
    const double eta = p.y();
    if (eta >= 0.0) return false;
    const bool lateral_in_cavity = std::abs(xi) < half_width;
    if (lateral_in_cavity && eta > -depth) return false;

    Candidate best;
    auto consider = [&](double d, const Vec2& n, int flag) {
        if (d >= 0.0 && (best.depth < 0.0 || d < best.depth)) best = {d, n, flag};
    };
    if (lateral_in_cavity) {
        // Below the cavity bottom.
        consider(-depth - eta, {0.0, 1.0}, 3);
    } else {
        consider(-eta, {0.0, 1.0}, 0);
        if (eta > -depth) {
            // Inside a wall at cavity height: push laterally into the cavity.
            if (xi > 0.0)
                consider(xi - half_width, {-1.0, 0.0}, 2);
            else
                consider(-xi - half_width, {1.0, 0.0}, 1);
        }
    }
    if (best.depth < 0.0) return false;
    out = best;
    return true;
}

}  // namespace

ContactResult contact_wrench(const PlanarPose& tcp_pose, const HoleGeometry& geometry,
                             const HoleSample& hole, const Vec3& tcp_vel,
                             const ContactParams& params) {
    if (!std::isfinite(tcp_pose.x) || !std::isfinite(tcp_pose.y) || !std::isfinite(tcp_pose.phi))
        throw PlantError("contact_wrench: non-finite pose");

    ContactResult result;
    const PlateFrame plate = plate_frame(hole);
    const double hw = geometry.hole_width / 2.0;
    const double pw = geometry.peg_width / 2.0;

    const Vec2 tip{tcp_pose.x, tcp_pose.y};
    const Vec2 axis{std::cos(tcp_pose.phi), std::sin(tcp_pose.phi)};   // base -> tip
    const Vec2 lateral{-axis.y(), axis.x()};
    const Vec2 base = tip - geometry.peg_length * axis;

    const Vec2 tcp_v{tcp_vel[0], tcp_vel[1]};
    const double omega = tcp_vel[2];
    auto point_velocity = [&](const Vec2& p) {
        const Vec2 r = p - tip;
        return Vec2{tcp_v.x() - omega * r.y(), tcp_v.y() + omega * r.x()};
    };

    auto add_force = [&](const Vec2& point, const Vec2& push_dir, double depth, int flag) {
        const Vec2 vp = point_velocity(point);
        const double depth_rate = -vp.dot(push_dir);
        const double normal_force = params.k_c * depth + params.d_c * depth_rate;
        if (normal_force <= 0.0) return;
        const Vec2 tangent{-push_dir.y(), push_dir.x()};
        const double vt = vp.dot(tangent);
        // stick-slip: sticking contacts hold more than sliding ones
        const double mu = std::abs(vt) < params.v_stick ? params.mu_static : params.mu;
        const double cap = mu * normal_force;
        const double friction = clamp(-params.k_f * vt, -cap, cap);
        const Vec2 force = normal_force * push_dir + friction * tangent;
        const Vec2 r = point - tip;
        result.wrench.fx += force.x();
        result.wrench.fy += force.y();
        result.wrench.tz += r.x() * force.y() - r.y() * force.x();
        switch (flag) {
            case 0: result.flags.surface = true; break;
            case 1: result.flags.left_wall = true; break;
            case 2: result.flags.right_wall = true; break;
            case 3: result.flags.bottom = true; break;
        }
    };

    // Tip corners against the plate material.
    for (int side = -1; side <= 1; side += 2) {
        const Vec2 corner = tip + side * pw * lateral;
        Candidate c;
        if (point_pushout(plate.to_plate(corner), hw, geometry.hole_depth, c))
            add_force(corner, plate.to_world_dir(c.normal), c.depth, c.flag);
    }

    // Mouth edges against the peg side lines (and faces).
    for (int side = -1; side <= 1; side += 2) {
        const Vec2 edge = plate.mouth + side * hw * plate.tangent;
        const Vec2 rel = edge - base;
        const double s = rel.dot(axis);
        const double d = rel.dot(lateral);
        if (s <= 0.0 || s >= geometry.peg_length || std::abs(d) >= pw) continue;
        // Push the peg so the edge exits through its nearest boundary.
        struct Exit {
            double depth;
            Vec2 dir;  // force direction on the peg, world frame
        };
        const Exit exits[4] = {
            {pw - d, -lateral},
            {pw + d, lateral},
            {geometry.peg_length - s, -axis},
            {s, axis},
        };
        const Exit* best = &exits[0];
        for (const Exit& e : exits)
            if (e.depth < best->depth) best = &e;
        add_force(edge, best->dir, best->depth, side < 0 ? 1 : 2);
    }

    return result;
}

}  // namespace pegrl
