#include "flexstereo/sim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flexstereo {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t base, std::string_view tag) {
  uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return splitmix64(base ^ h);
}

FrameMotion compose(const FrameMotion& parent, const FrameMotion& child) {
  FrameMotion out;
  out.rotation = parent.rotation * child.rotation;
  const Eigen::Vector3d parent_omega_in_child =
      child.rotation.transpose() * parent.omega;
  out.omega = parent_omega_in_child + child.omega;
  out.omega_dot = child.rotation.transpose() * parent.omega_dot +
                  child.omega_dot - child.omega.cross(parent_omega_in_child);
  return out;
}

FrameMotion revolute(const Eigen::Vector3d& axis, double angle, double rate,
                     double accel) {
  FrameMotion out;
  out.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  out.omega = axis * rate;
  out.omega_dot = axis * accel;
  return out;
}

RigidMotion attach(const RigidMotion& base, const Eigen::Vector3d& offset,
                   const FrameMotion& joint) {
  RigidMotion out;
  const Eigen::Matrix3d& r = base.frame.rotation;
  const Eigen::Vector3d& w = base.frame.omega;
  out.pos = base.pos + r * offset;
  out.vel = base.vel + r * w.cross(offset);
  out.acc = base.acc + r * (base.frame.omega_dot.cross(offset) +
                            w.cross(w.cross(offset)));
  out.frame = compose(base.frame, joint);
  return out;
}

RigidMotion body_trajectory(double t, const TrajectoryConfig& cfg) {
  const double w = 2.0 * M_PI / cfg.period;
  const double s1 = std::sin(w * t);
  const double c1 = std::cos(w * t);
  const double s2 = std::sin(2.0 * w * t);
  const double c2 = std::cos(2.0 * w * t);

  RigidMotion body;
  body.pos = Eigen::Vector3d(cfg.amp_x * s1, cfg.amp_y * s2, cfg.altitude);
  body.vel = Eigen::Vector3d(cfg.amp_x * w * c1, 2.0 * cfg.amp_y * w * c2, 0.0);
  body.acc = Eigen::Vector3d(-cfg.amp_x * w * w * s1,
                             -4.0 * cfg.amp_y * w * w * s2, 0.0);

  const double ps = std::sin(2.0 * w * t + 1.0);
  const double pc = std::cos(2.0 * w * t + 1.0);
  const FrameMotion yaw = revolute(Eigen::Vector3d::UnitZ(), cfg.yaw_amp * s1,
                                   cfg.yaw_amp * w * c1,
                                   -cfg.yaw_amp * w * w * s1);
  const FrameMotion pitch =
      revolute(Eigen::Vector3d::UnitY(), cfg.pitch_amp * ps,
               2.0 * cfg.pitch_amp * w * pc, -4.0 * cfg.pitch_amp * w * w * ps);
  const FrameMotion roll =
      revolute(Eigen::Vector3d::UnitX(), cfg.roll_amp * s2,
               2.0 * cfg.roll_amp * w * c2, -4.0 * cfg.roll_amp * w * w * s2);
  body.frame = compose(compose(yaw, pitch), roll);
  return body;
}

DisturbanceSequence::DisturbanceSequence(const DisturbanceConfig& cfg,
                                         double duration, uint64_t seed)
    : cfg_(cfg) {
  if (!(cfg.periodic_freq > 0.0) || !(cfg.gust_freq > 0.0)) {
    throw std::invalid_argument("DisturbanceSequence: frequencies must be > 0");
  }
  const auto intervals =
      static_cast<size_t>(std::ceil(duration * cfg.gust_freq)) + 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(cfg.gust_mean, cfg.gust_std);
  gusts_[0].reserve(intervals);
  gusts_[1].reserve(intervals);
  for (size_t k = 0; k < intervals; ++k) {
    gusts_[0].push_back(gauss(rng));
    gusts_[1].push_back(gauss(rng));
  }
}

double DisturbanceSequence::force(double t, WingSide side) const {
  double f = cfg_.periodic_amp * std::sin(2.0 * M_PI * cfg_.periodic_freq * t);
  if (t >= 0.0) {
    const double interval = 1.0 / cfg_.gust_freq;
    const auto k = static_cast<size_t>(std::floor(t / interval));
    const auto& gusts = gusts_[side == WingSide::kLeft ? 0 : 1];
    if (k < gusts.size() && t - static_cast<double>(k) * interval <
                                cfg_.gust_duration) {
      f += gusts[k];
    }
  }
  return f;
}

Eigen::Vector2d joint_accelerations(const WingJointState& s, double tip_force,
                                    WingSide side, const WingParams& wp,
                                    const RigGeometry& geom) {
  const double roll_lever = geom.inner_span + geom.outer_span;
  const double tau_roll = span_sign(side) * tip_force * roll_lever;
  const double tau_pitch = -tip_force * geom.chord_offset;
  return {(-wp.stiffness_roll * s.roll - wp.damping_roll * s.roll_rate +
           tau_roll) /
              wp.inertia_roll,
          (-wp.stiffness_pitch * s.pitch - wp.damping_pitch * s.pitch_rate +
           tau_pitch) /
              wp.inertia_pitch};
}

namespace {

Eigen::Vector4d wing_rhs(const Eigen::Vector4d& y, double tip_force,
                         WingSide side, const WingParams& wp,
                         const RigGeometry& geom) {
  WingJointState s{y(0), y(1), y(2), y(3)};
  const Eigen::Vector2d acc = joint_accelerations(s, tip_force, side, wp, geom);
  return {y(1), acc(0), y(3), acc(1)};
}

}  // namespace

WingJointState step_wing_dynamics(const WingJointState& s, double tip_force,
                                  WingSide side, const WingParams& wp,
                                  const RigGeometry& geom, double dt) {
  if (std::abs(dt) > 1.0000001e-3) {
    throw std::invalid_argument("step_wing_dynamics: |dt| must be <= 1e-3 s");
  }
  const Eigen::Vector4d y0(s.roll, s.roll_rate, s.pitch, s.pitch_rate);
  const Eigen::Vector4d k1 = wing_rhs(y0, tip_force, side, wp, geom);
  const Eigen::Vector4d k2 =
      wing_rhs(y0 + 0.5 * dt * k1, tip_force, side, wp, geom);
  const Eigen::Vector4d k3 =
      wing_rhs(y0 + 0.5 * dt * k2, tip_force, side, wp, geom);
  const Eigen::Vector4d k4 = wing_rhs(y0 + dt * k3, tip_force, side, wp, geom);
  const Eigen::Vector4d y =
      y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  WingJointState out{y(0), y(1), y(2), y(3)};
  const double limit = M_PI / 4.0;
  if (std::abs(out.roll) >= limit) {
    throw std::runtime_error(std::string(side_name(side)) +
                             " wing roll joint left the validity envelope "
                             "(|angle| >= pi/4)");
  }
  if (std::abs(out.pitch) >= limit) {
    throw std::runtime_error(std::string(side_name(side)) +
                             " wing pitch joint left the validity envelope "
                             "(|angle| >= pi/4)");
  }
  return out;
}

double wing_energy(const WingJointState& s, const WingParams& wp) {
  return 0.5 * (wp.inertia_roll * s.roll_rate * s.roll_rate +
                wp.stiffness_roll * s.roll * s.roll +
                wp.inertia_pitch * s.pitch_rate * s.pitch_rate +
                wp.stiffness_pitch * s.pitch * s.pitch);
}

RigState rig_kinematics(const RigidMotion& body, const WingJointState& wing,
                        const Eigen::Vector2d& joint_accel, WingSide side,
                        const RigGeometry& geom) {
  const double s = span_sign(side);
  const RigidMotion at_root =
      attach(body, Eigen::Vector3d(0.0, s * geom.root_span, 0.0),
             revolute(Eigen::Vector3d::UnitX(), wing.roll, wing.roll_rate,
                      joint_accel(0)));
  const RigidMotion at_mid =
      attach(at_root, Eigen::Vector3d(0.0, s * geom.inner_span, 0.0),
             revolute(Eigen::Vector3d::UnitY(), wing.pitch, wing.pitch_rate,
                      joint_accel(1)));
  const RigidMotion mount =
      attach(at_mid, Eigen::Vector3d(0.0, s * geom.outer_span, 0.0),
             revolute(Eigen::Vector3d::UnitZ(), -s * geom.toe_in, 0.0, 0.0));

  RigState out;
  out.orientation = Eigen::Quaterniond(mount.frame.rotation).normalized();
  out.omega = mount.frame.omega;
  out.omega_dot = mount.frame.omega_dot;
  out.pos = mount.pos;
  out.vel = mount.vel;
  out.acc = mount.acc;
  return out;
}

RelativePose relative_pose_between(const RigState& rig1, const RigState& rig2) {
  RelativePose t;
  t.rotation = quat_multiply(rig1.orientation.conjugate(), rig2.orientation);
  t.translation = rig1.orientation.conjugate() * (rig2.pos - rig1.pos);
  return t;
}

Eigen::Vector3d relative_velocity_between(const RigState& rig1,
                                          const RigState& rig2) {
  return rig1.orientation.conjugate() * (rig2.vel - rig1.vel);
}

Simulator::Simulator(const SimParams& params)
    : params_(params),
      dist_(params.disturbance, params.duration + 2.0,
            derive_seed(params.seed, "gust")) {
  if (!(params.imu_rate > 0.0) || params.substeps < 1) {
    throw std::invalid_argument("Simulator: invalid rate or substeps");
  }
}

SimSample Simulator::sample() const {
  const RigidMotion body = body_trajectory(t_, params_.trajectory);
  const double f_left = dist_.force(t_, WingSide::kLeft);
  const double f_right = dist_.force(t_, WingSide::kRight);

  SimSample s;
  s.t = t_;
  s.left = left_;
  s.right = right_;
  s.rig1 = rig_kinematics(
      body, left_,
      joint_accelerations(left_, f_left, WingSide::kLeft, params_.wing,
                          params_.geometry),
      WingSide::kLeft, params_.geometry);
  s.rig2 = rig_kinematics(
      body, right_,
      joint_accelerations(right_, f_right, WingSide::kRight, params_.wing,
                          params_.geometry),
      WingSide::kRight, params_.geometry);
  s.t_true = relative_pose_between(s.rig1, s.rig2);
  return s;
}

void Simulator::advance() {
  const double h = 1.0 / (params_.imu_rate * params_.substeps);
  for (int i = 0; i < params_.substeps; ++i) {
    const double t_sub =
        on_grid_ ? static_cast<double>(substep_count_) * h : t_;
    left_ = step_wing_dynamics(left_, dist_.force(t_sub, WingSide::kLeft),
                               WingSide::kLeft, params_.wing, params_.geometry,
                               h);
    right_ = step_wing_dynamics(right_, dist_.force(t_sub, WingSide::kRight),
                                WingSide::kRight, params_.wing,
                                params_.geometry, h);
    ++substep_count_;
    t_ = on_grid_ ? static_cast<double>(substep_count_) * h : t_ + h;
  }
}

void Simulator::advance_by(double dt) {
  left_ = step_wing_dynamics(left_, dist_.force(t_, WingSide::kLeft),
                             WingSide::kLeft, params_.wing, params_.geometry,
                             dt);
  right_ = step_wing_dynamics(right_, dist_.force(t_, WingSide::kRight),
                              WingSide::kRight, params_.wing, params_.geometry,
                              dt);
  t_ += dt;
  on_grid_ = false;
}

ImuSynthesizer::ImuSynthesizer(const ImuNoiseConfig& cfg, uint64_t seed,
                               const Eigen::Vector3d& gravity)
    : cfg_(cfg), gravity_(gravity), rng_(seed) {
  if (cfg.gyro_var < 0.0 || cfg.accel_var < 0.0 || !(cfg.rate > 0.0)) {
    throw std::invalid_argument("ImuSynthesizer: invalid noise config");
  }
}

ImuPair ImuSynthesizer::synth(const SimSample& s) {
  const double sg = std::sqrt(cfg_.gyro_var * cfg_.multiplier);
  const double sa = std::sqrt(cfg_.accel_var * cfg_.multiplier);
  auto noise3 = [&](double sigma) {
    return Eigen::Vector3d(sigma * gauss_(rng_), sigma * gauss_(rng_),
                           sigma * gauss_(rng_));
  };

  ImuPair m;
  m.t = s.t;
  m.omega1 = s.rig1.omega + noise3(sg);
  m.omega2 = s.rig2.omega + noise3(sg);
  m.accel1 =
      s.rig1.orientation.conjugate() * (s.rig1.acc - gravity_) + noise3(sa);
  m.accel2 =
      s.rig2.orientation.conjugate() * (s.rig2.acc - gravity_) + noise3(sa);
  m.variance.segment<6>(0).setConstant(cfg_.gyro_var * cfg_.multiplier);
  m.variance.segment<6>(6).setConstant(cfg_.accel_var * cfg_.multiplier);
  return m;
}

VisionSynthesizer::VisionSynthesizer(const VisionNoiseConfig& cfg,
                                     uint64_t seed)
    : cfg_(cfg), rng_(seed) {
  if (cfg.outlier_prob < 0.0 || cfg.outlier_prob > 1.0) {
    throw std::invalid_argument(
        "VisionSynthesizer: outlier_prob must be in [0, 1]");
  }
}

PoseCovariance VisionSynthesizer::reported_covariance() const {
  PoseCovariance cov = PoseCovariance::Zero();
  const double sr = cfg_.cov_inflation * cfg_.sigma_rot;
  const double st = cfg_.cov_inflation * cfg_.sigma_trans;
  cov.diagonal().head<3>().setConstant(sr * sr);
  cov.diagonal().tail<3>().setConstant(st * st);
  return cov;
}

VisualMeasurement VisionSynthesizer::synth(double t,
                                           const RelativePose& t_true) {
  const bool outlier = uniform_(rng_) < cfg_.outlier_prob;
  auto noise3 = [&](double sigma) {
    return Eigen::Vector3d(sigma * gauss_(rng_), sigma * gauss_(rng_),
                           sigma * gauss_(rng_));
  };
  const double scale = outlier ? cfg_.outlier_scale : 1.0;
  Eigen::Vector3d n_theta = scale * noise3(cfg_.sigma_rot);
  const Eigen::Vector3d n_trans = scale * noise3(cfg_.sigma_trans);
  // Keep the rotation perturbation inside the exp map's domain.
  const double max_angle = 0.999 * M_PI;
  if (n_theta.norm() > max_angle) {
    n_theta *= max_angle / n_theta.norm();
  }

  VisualMeasurement m;
  m.t = t;
  m.q = quat_multiply(t_true.rotation, small_angle_to_quat(n_theta));
  const Eigen::Vector3d perturbed = t_true.translation + n_trans;
  m.dir = perturbed.norm() > 1e-9 ? perturbed.normalized()
                                  : t_true.translation.normalized();
  m.cov = reported_covariance();
  return m;
}

}  // namespace flexstereo
