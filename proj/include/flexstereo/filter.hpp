#pragma once

#include <Eigen/Core>

#include "flexstereo/geometry.hpp"

// 22-state error-state EKF for the relative pose between two IMU rigs.
//
// Nominal state: [q w1 w2 p v a1 a2] where q and p are the relative pose of
// rig 2 in rig 1 (see geometry.hpp), w_i are the body angular rates of the
// rigs, v is the relative velocity in frame-1 coordinates and a_i are the
// specific forces sensed by the two accelerometers in their own frames.
// There is no scale state: the vision front end measures single-frame
// relative pose and never propagates scale.
//
// Error state: 21 scalars in the fixed block order
//   [dtheta dw1 dw2 dp dv da1 da2],
// multiplicative for the quaternion (q_true = q_est (*) exp(dtheta)),
// additive elsewhere. The angular rates and specific forces are modeled as
// random walks; IMU readings enter as measurement updates on those blocks,
// not as control inputs.

namespace flexstereo {

inline constexpr int kErrorDim = 21;
inline constexpr int kNoiseDim = 12;
inline constexpr int kImuDim = 12;
inline constexpr int kPoseDim = 6;

// Error-state block offsets.
inline constexpr int kIdxTheta = 0;
inline constexpr int kIdxOmega1 = 3;
inline constexpr int kIdxOmega2 = 6;
inline constexpr int kIdxPos = 9;
inline constexpr int kIdxVel = 12;
inline constexpr int kIdxAcc1 = 15;
inline constexpr int kIdxAcc2 = 18;

using ErrorVector = Eigen::Matrix<double, kErrorDim, 1>;
using CovarianceMatrix = Eigen::Matrix<double, kErrorDim, kErrorDim>;
using SystemMatrix = Eigen::Matrix<double, kErrorDim, kErrorDim>;
using NoiseInputMatrix = Eigen::Matrix<double, kErrorDim, kNoiseDim>;
using NoiseCovariance = Eigen::Matrix<double, kNoiseDim, kNoiseDim>;
using PoseCovariance = Eigen::Matrix<double, kPoseDim, kPoseDim>;

struct FilterState {
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d omega1{Eigen::Vector3d::Zero()};  // rad/s, frame 1
  Eigen::Vector3d omega2{Eigen::Vector3d::Zero()};  // rad/s, frame 2
  Eigen::Vector3d p{Eigen::Vector3d::Zero()};       // m, frame 1
  Eigen::Vector3d v{Eigen::Vector3d::Zero()};       // m/s, frame 1
  Eigen::Vector3d a1{Eigen::Vector3d::Zero()};      // m/s^2, frame 1
  Eigen::Vector3d a2{Eigen::Vector3d::Zero()};      // m/s^2, frame 2
};

// Deterministic part of the state dynamics; the rate and specific-force
// states are pure random walks, their deterministic derivative is zero.
struct StateRates {
  Eigen::Vector4d q_dot{Eigen::Vector4d::Zero()};  // (w, x, y, z)
  Eigen::Vector3d p_dot{Eigen::Vector3d::Zero()};
  Eigen::Vector3d v_dot{Eigen::Vector3d::Zero()};
};

// Standard deviations of the random-walk drivers, per axis.
// Units rad/s/sqrt(s) and m/s^2/sqrt(s).
struct ProcessNoise {
  Eigen::Vector3d sigma_omega1{Eigen::Vector3d::Zero()};
  Eigen::Vector3d sigma_omega2{Eigen::Vector3d::Zero()};
  Eigen::Vector3d sigma_accel1{Eigen::Vector3d::Zero()};
  Eigen::Vector3d sigma_accel2{Eigen::Vector3d::Zero()};

  NoiseCovariance q_c() const;
};

// One synchronized reading of both IMUs. `variance` is the diagonal of the
// 12x12 measurement covariance in the order [w1 w2 a1 a2].
struct ImuPair {
  double t = 0.0;
  Eigen::Vector3d omega1{Eigen::Vector3d::Zero()};
  Eigen::Vector3d omega2{Eigen::Vector3d::Zero()};
  Eigen::Vector3d accel1{Eigen::Vector3d::Zero()};
  Eigen::Vector3d accel2{Eigen::Vector3d::Zero()};
  Eigen::Matrix<double, kImuDim, 1> variance =
      Eigen::Matrix<double, kImuDim, 1>::Zero();
};

// Prior-fused pose measurement; covariance in [dtheta; dp] order.
struct FusedPoseMeasurement {
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d p{Eigen::Vector3d::Zero()};
  PoseCovariance cov = PoseCovariance::Zero();
};

// dq/dt = 0.5 (q (*) w2_bar - w1_bar (*) q)
// dp/dt = v - w1 x p
// dv/dt = C(q) a2 - a1 - w1 x v
StateRates state_derivative(const FilterState& x);

// Analytic Jacobians of the error dynamics: f_c = d(err_dot)/d(err),
// g_c = d(err_dot)/d(noise) with noise order [n_w1 n_w2 n_a1 n_a2].
void continuous_jacobians(const FilterState& x, SystemMatrix& f_c,
                          NoiseInputMatrix& g_c);

// Zeroth-order discretization: f_d = I + f_c*dt,
// q_d = dt * f_d * g_c * q_c * g_c^T * f_d^T. Throws for dt <= 0.
void discretize(const SystemMatrix& f_c, const NoiseInputMatrix& g_c,
                const NoiseCovariance& q_c, double dt, SystemMatrix& f_d,
                CovarianceMatrix& q_d);

// q <- q (*) exp(dtheta) (renormalized), every other block added.
FilterState error_injection(const FilterState& x, const ErrorVector& dx);

CovarianceMatrix symmetrized(const CovarianceMatrix& p);

class RelativeEkf {
 public:
  RelativeEkf(const FilterState& x0, const CovarianceMatrix& p0,
              const ProcessNoise& noise);

  // Euler state prediction plus covariance propagation. Throws when
  // |w_i| * dt >= 0.5 rad (the zeroth-order integrator is out of its depth)
  // or dt <= 0.
  void predict(double dt);

  // Direct observation of the w1/w2/a1/a2 blocks, Joseph-form update.
  void imu_update(const ImuPair& m);

  // Pose observation: residual [log(q_est^-1 (*) q_f); p_f - p_est] on the
  // [dtheta; dp] blocks, multiplicative quaternion correction.
  void pose_update(const FusedPoseMeasurement& m);

  const FilterState& state() const { return x_; }
  const CovarianceMatrix& covariance() const { return p_; }
  const ProcessNoise& process_noise() const { return noise_; }

 private:
  template <int MeasDim>
  void apply_update(const Eigen::Matrix<double, MeasDim, kErrorDim>& h,
                    const Eigen::Matrix<double, MeasDim, 1>& residual,
                    const Eigen::Matrix<double, MeasDim, MeasDim>& r);

  FilterState x_;
  CovarianceMatrix p_;
  ProcessNoise noise_;
};

}  // namespace flexstereo
