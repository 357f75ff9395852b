#include "flexstereo/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace flexstereo {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return m;
}

Eigen::Quaterniond quat_multiply(const Eigen::Quaterniond& a,
                                 const Eigen::Quaterniond& b) {
  Eigen::Quaterniond q = a * b;
  q.normalize();
  return q;
}

Eigen::Matrix3d quat_to_rotmat(const Eigen::Quaterniond& q) {
  return q.normalized().toRotationMatrix();
}

Eigen::Quaterniond small_angle_to_quat(const Eigen::Vector3d& theta) {
  const double angle = theta.norm();
  const double half = 0.5 * angle;
  // vec = theta * sin(angle/2)/angle; series below 1e-6 to avoid 0/0.
  double factor;
  if (angle < 1e-6) {
    factor = 0.5 - angle * angle / 48.0;
  } else {
    factor = std::sin(half) / angle;
  }
  Eigen::Quaterniond q(std::cos(half), factor * theta.x(), factor * theta.y(),
                       factor * theta.z());
  q.normalize();
  return q;
}

Eigen::Vector3d quat_to_small_angle(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond qc = canonical(q.normalized());
  const Eigen::Vector3d vec = qc.vec();
  const double s = vec.norm();
  const double angle = 2.0 * std::atan2(s, qc.w());
  if (angle >= M_PI - 1e-9) {
    throw std::domain_error(
        "quat_to_small_angle: rotation angle too close to pi");
  }
  if (s < 1e-9) {
    return vec * (2.0 / qc.w());
  }
  return vec * (angle / s);
}

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  if (q.w() < 0.0) {
    return Eigen::Quaterniond(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

double quat_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond d = canonical(a.conjugate() * b);
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

RelativePose compose(const RelativePose& a, const RelativePose& b) {
  RelativePose out;
  out.rotation = quat_multiply(a.rotation, b.rotation);
  out.translation = a.translation + a.rotation * b.translation;
  return out;
}

RelativePose inverse(const RelativePose& t) {
  RelativePose out;
  out.rotation = t.rotation.conjugate();
  out.translation = -(out.rotation * t.translation);
  return out;
}

}  // namespace flexstereo
