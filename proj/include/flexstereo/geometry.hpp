#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

// Quaternion and small-angle algebra shared by the filter, the wing prior,
// the simulator and the depth model.
//
// Conventions, fixed once for the whole library:
//  * Quaternions are Hamilton, scalar-first (w, x, y, z), unit norm.
//  * quat_to_rotmat(quat_multiply(a, b)) == quat_to_rotmat(a) * quat_to_rotmat(b).
//  * A RelativePose describes frame 2 relative to frame 1: a point with
//    coordinates y in frame 2 has coordinates R(q) * y + p in frame 1. For
//    world rotations R1, R2 and positions x1, x2 this means
//      q = quat(R1^T * R2),   p = R1^T * (x2 - x1).
//  * Under body rates w1, w2 of the two frames the relative quaternion obeys
//      dq/dt = 0.5 * (q (*) w2_bar - w1_bar (*) q).
//  * Rotation errors are right-multiplicative: q_true = q_est (*) exp(dtheta).
//  * The double cover is canonicalized to w >= 0 whenever quaternions are
//    compared or mapped to small angles; the sign of an evolving state
//    quaternion is otherwise left untouched.

namespace flexstereo {

// skew(v) * u == v x u
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Hamilton product a (*) b, renormalized.
Eigen::Quaterniond quat_multiply(const Eigen::Quaterniond& a,
                                 const Eigen::Quaterniond& b);

Eigen::Matrix3d quat_to_rotmat(const Eigen::Quaterniond& q);

// Exact exponential map (axis theta/|theta|, angle |theta|).
// First order this is [1, theta/2]. Requires |theta| < pi.
Eigen::Quaterniond small_angle_to_quat(const Eigen::Vector3d& theta);

// Exact log map, inverse of small_angle_to_quat. q and -q give the same
// result. Throws std::domain_error when the rotation angle reaches pi.
Eigen::Vector3d quat_to_small_angle(const Eigen::Quaterniond& q);

// Representative of the double cover with non-negative scalar part.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

// Angle of the relative rotation between a and b, in [0, pi].
double quat_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

struct RelativePose {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{Eigen::Vector3d::Zero()};
};

// compose(T_12, T_23) = T_13
RelativePose compose(const RelativePose& a, const RelativePose& b);
RelativePose inverse(const RelativePose& t);

}  // namespace flexstereo
