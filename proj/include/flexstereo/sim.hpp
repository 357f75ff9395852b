#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "flexstereo/filter.hpp"
#include "flexstereo/geometry.hpp"
#include "flexstereo/wing_prior.hpp"

// Deterministic simulation of two IMU-camera rigs on flexible wings:
// spring-damper joint dynamics under periodic plus gust forcing, an analytic
// aircraft trajectory, exact rigid-chain kinematics and synthetic IMU /
// visual measurement streams.
//
// Frames: world is z-up; the body frame is x forward, y to the left wing,
// z up. Rig 1 rides the left wing, rig 2 the right wing, so the nominal
// relative translation of rig 2 in rig 1 points along -y with the baseline
// length. Each camera is toed in about the vertical axis.

namespace flexstereo {

uint64_t derive_seed(uint64_t base, std::string_view tag);

// Rotating frame: world rotation plus angular velocity and acceleration in
// the frame's own coordinates.
struct FrameMotion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d omega{Eigen::Vector3d::Zero()};
  Eigen::Vector3d omega_dot{Eigen::Vector3d::Zero()};
};

// Frame motion anchored at a moving point (world position/velocity/accel).
struct RigidMotion {
  FrameMotion frame;
  Eigen::Vector3d pos{Eigen::Vector3d::Zero()};
  Eigen::Vector3d vel{Eigen::Vector3d::Zero()};
  Eigen::Vector3d acc{Eigen::Vector3d::Zero()};
};

// world = parent o child; omega/omega_dot stay in own-frame coordinates.
FrameMotion compose(const FrameMotion& parent, const FrameMotion& child);

// Single-axis rotation about a fixed local axis.
FrameMotion revolute(const Eigen::Vector3d& axis, double angle, double rate,
                     double accel);

// Rigid attachment at constant local offset, followed by a joint rotation.
RigidMotion attach(const RigidMotion& base, const Eigen::Vector3d& offset,
                   const FrameMotion& joint);

struct TrajectoryConfig {
  double period = 40.0;    // s, closed figure-eight
  double amp_x = 120.0;    // m
  double amp_y = 60.0;     // m
  double altitude = 100.0;  // m
  double yaw_amp = 0.6;    // rad
  double pitch_amp = 0.05;  // rad
  double roll_amp = 0.25;  // rad
};

// Closed level figure-eight with sinusoidal attitude motion; position,
// velocity, acceleration and angular rates are all analytic and mutually
// consistent.
RigidMotion body_trajectory(double t, const TrajectoryConfig& cfg);

enum class WingSide { kLeft, kRight };
inline double span_sign(WingSide side) {
  return side == WingSide::kLeft ? 1.0 : -1.0;
}
inline const char* side_name(WingSide side) {
  return side == WingSide::kLeft ? "left" : "right";
}

// Joint state of one wing: root roll about the body x-axis and mid-wing
// pitch about the span line.
struct WingJointState {
  double roll = 0.0;        // rad
  double roll_rate = 0.0;   // rad/s
  double pitch = 0.0;       // rad
  double pitch_rate = 0.0;  // rad/s
};

struct WingParams {
  double inertia_roll = 0.25;    // kg m^2
  double stiffness_roll = 37.5;  // N m / rad
  double damping_roll = 0.49;    // N m s / rad
  double inertia_pitch = 0.02;
  double stiffness_pitch = 12.6;
  double damping_pitch = 0.30;
};

struct RigGeometry {
  double root_span = 0.05;     // m, body origin -> roll joint
  double inner_span = 0.725;   // m, roll joint -> pitch joint
  double outer_span = 0.725;   // m, pitch joint -> camera/IMU mount
  double chord_offset = 0.004;  // m, tip-force lever about the pitch axis
  double toe_in = 8.0 * M_PI / 180.0;  // rad, each camera towards the other

  double baseline() const {
    return 2.0 * (root_span + inner_span + outer_span);
  }
};

struct DisturbanceConfig {
  double periodic_amp = 0.25;   // N
  double periodic_freq = 1.5;   // Hz
  double gust_mean = 1.0;       // N
  double gust_std = 0.1;        // N
  double gust_freq = 0.125;     // Hz (resample interval 8 s)
  double gust_duration = 0.4;   // s
};

// Tip-force schedule: in-phase sinusoid on both tips plus per-side gusts of
// random magnitude, resampled at the gust frequency and active for the gust
// duration. The whole schedule is drawn up front from the seed, so
// evaluation is pure.
class DisturbanceSequence {
 public:
  DisturbanceSequence(const DisturbanceConfig& cfg, double duration,
                      uint64_t seed);

  // Tip force (N) along the wing normal at time t.
  double force(double t, WingSide side) const;

 private:
  DisturbanceConfig cfg_;
  std::vector<double> gusts_[2];
};

// Joint angular accelerations [roll; pitch] for a given tip force. The
// torque model is linear: force normal to the wing at fixed lever arms.
Eigen::Vector2d joint_accelerations(const WingJointState& s, double tip_force,
                                    WingSide side, const WingParams& wp,
                                    const RigGeometry& geom);

// One classical RK4 step with the tip force held constant over the step.
// Requires |dt| <= 1e-3 s; throws when a joint leaves the |angle| < pi/4
// validity envelope, naming the joint.
WingJointState step_wing_dynamics(const WingJointState& s, double tip_force,
                                  WingSide side, const WingParams& wp,
                                  const RigGeometry& geom, double dt);

// Spring + kinetic energy of one wing's joints.
double wing_energy(const WingJointState& s, const WingParams& wp);

// World motion of one rig mount: body -> roll joint -> pitch joint -> toe-in.
struct RigState {
  Eigen::Quaterniond orientation{1.0, 0.0, 0.0, 0.0};  // rig -> world
  Eigen::Vector3d omega{Eigen::Vector3d::Zero()};      // rad/s, rig frame
  Eigen::Vector3d omega_dot{Eigen::Vector3d::Zero()};  // rad/s^2, rig frame
  Eigen::Vector3d pos{Eigen::Vector3d::Zero()};        // m, world
  Eigen::Vector3d vel{Eigen::Vector3d::Zero()};        // m/s, world
  Eigen::Vector3d acc{Eigen::Vector3d::Zero()};        // m/s^2, world
};

RigState rig_kinematics(const RigidMotion& body, const WingJointState& wing,
                        const Eigen::Vector2d& joint_accel, WingSide side,
                        const RigGeometry& geom);

// Pose of rig 2 in rig 1.
RelativePose relative_pose_between(const RigState& rig1, const RigState& rig2);
// Relative velocity in rig-1 coordinates, R1^T (v2 - v1).
Eigen::Vector3d relative_velocity_between(const RigState& rig1,
                                          const RigState& rig2);

struct SimSample {
  double t = 0.0;
  RelativePose t_true;
  RigState rig1, rig2;
  WingJointState left, right;
};

struct SimParams {
  TrajectoryConfig trajectory;
  WingParams wing;
  RigGeometry geometry;
  DisturbanceConfig disturbance;
  double duration = 60.0;   // s
  double imu_rate = 100.0;  // Hz
  int substeps = 10;        // wing ODE substeps per IMU interval
  uint64_t seed = 1;
};

class Simulator {
 public:
  explicit Simulator(const SimParams& params);

  double time() const { return t_; }
  SimSample sample() const;

  // Advance one IMU interval (substepped RK4, zero-order-hold forces).
  void advance();

  // Single wing ODE step of arbitrary small dt (forward or backward); used
  // by consistency oracles that probe the kinematics around a sample time.
  void advance_by(double dt);

  const WingJointState& left_wing() const { return left_; }
  const WingJointState& right_wing() const { return right_; }
  const DisturbanceSequence& disturbance() const { return dist_; }
  const SimParams& params() const { return params_; }

 private:
  SimParams params_;
  DisturbanceSequence dist_;
  WingJointState left_, right_;
  double t_ = 0.0;
  long long substep_count_ = 0;
  bool on_grid_ = true;
};

struct ImuNoiseConfig {
  double gyro_var = 1.225e-7;   // (rad/s)^2 per sample
  double accel_var = 1.6e-5;    // (m/s^2)^2 per sample
  double rate = 100.0;          // Hz
  double multiplier = 1.0;      // scales both variances
};

// Turns ground-truth rig kinematics into noisy specific-force / rate
// readings: w = omega + n, a = R^T (acc - g) + n.
class ImuSynthesizer {
 public:
  ImuSynthesizer(const ImuNoiseConfig& cfg, uint64_t seed,
                 const Eigen::Vector3d& gravity = {0.0, 0.0, -9.81});

  ImuPair synth(const SimSample& s);

  const Eigen::Vector3d& gravity() const { return gravity_; }

 private:
  ImuNoiseConfig cfg_;
  Eigen::Vector3d gravity_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

struct VisionNoiseConfig {
  double sigma_rot = 2.0 * M_PI / 180.0;  // rad, actual generator noise
  double sigma_trans = 0.055;             // m, perturbation before normalize
  double cov_inflation = 1.75;  // reported sigma = actual * inflation
  double outlier_prob = 0.02;
  double outlier_scale = 20.0;
  double rate = 10.0;  // Hz
};

// Synthetic stand-in for the feature/PNP pipeline: the true pose perturbed
// in the tangent space, translation reduced to a unit direction. Outliers
// scale the perturbation. The reported covariance is conservatively
// inflated, as RANSAC covariances are in practice.
class VisionSynthesizer {
 public:
  VisionSynthesizer(const VisionNoiseConfig& cfg, uint64_t seed);

  VisualMeasurement synth(double t, const RelativePose& t_true);

  PoseCovariance reported_covariance() const;

 private:
  VisionNoiseConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace flexstereo
