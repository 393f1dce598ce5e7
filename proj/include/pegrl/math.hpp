#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace pegrl {

// Joint-space vectors are dynamically sized but bounded, so they live on the
// stack and the 1 kHz plant loop never allocates.
inline constexpr int kMaxJoints = 8;

using JointVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxJoints, 1>;
using JacMat = Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, kMaxJoints>;
using PinvMat = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::ColMajor, kMaxJoints, 3>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

// Difference a - b on the circle, wrapped.
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace pegrl
