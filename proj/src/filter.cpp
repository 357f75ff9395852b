#include "flexstereo/filter.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace flexstereo {

namespace {

Eigen::Quaterniond pure(const Eigen::Vector3d& v) {
  return Eigen::Quaterniond(0.0, v.x(), v.y(), v.z());
}

Eigen::Vector4d wxyz(const Eigen::Quaterniond& q) {
  return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
}

}  // namespace

NoiseCovariance ProcessNoise::q_c() const {
  NoiseCovariance q = NoiseCovariance::Zero();
  q.diagonal().segment<3>(0) = sigma_omega1.cwiseAbs2();
  q.diagonal().segment<3>(3) = sigma_omega2.cwiseAbs2();
  q.diagonal().segment<3>(6) = sigma_accel1.cwiseAbs2();
  q.diagonal().segment<3>(9) = sigma_accel2.cwiseAbs2();
  return q;
}

StateRates state_derivative(const FilterState& x) {
  StateRates out;
  const Eigen::Quaterniond qd1 = x.q * pure(x.omega2);
  const Eigen::Quaterniond qd2 = pure(x.omega1) * x.q;
  out.q_dot = 0.5 * (wxyz(qd1) - wxyz(qd2));
  out.p_dot = x.v - x.omega1.cross(x.p);
  out.v_dot = x.q * x.a2 - x.a1 - x.omega1.cross(x.v);
  return out;
}

void continuous_jacobians(const FilterState& x, SystemMatrix& f_c,
                          NoiseInputMatrix& g_c) {
  const Eigen::Matrix3d c = quat_to_rotmat(x.q);
  const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();

  f_c.setZero();
  // dtheta_dot = -[w2 x] dtheta - C^T dw1 + dw2
  f_c.block<3, 3>(kIdxTheta, kIdxTheta) = -skew(x.omega2);
  f_c.block<3, 3>(kIdxTheta, kIdxOmega1) = -c.transpose();
  f_c.block<3, 3>(kIdxTheta, kIdxOmega2) = eye;
  // dp_dot = [p x] dw1 - [w1 x] dp + dv
  f_c.block<3, 3>(kIdxPos, kIdxOmega1) = skew(x.p);
  f_c.block<3, 3>(kIdxPos, kIdxPos) = -skew(x.omega1);
  f_c.block<3, 3>(kIdxPos, kIdxVel) = eye;
  // dv_dot = -C [a2 x] dtheta + [v x] dw1 - [w1 x] dv - da1 + C da2
  f_c.block<3, 3>(kIdxVel, kIdxTheta) = -c * skew(x.a2);
  f_c.block<3, 3>(kIdxVel, kIdxOmega1) = skew(x.v);
  f_c.block<3, 3>(kIdxVel, kIdxVel) = -skew(x.omega1);
  f_c.block<3, 3>(kIdxVel, kIdxAcc1) = -eye;
  f_c.block<3, 3>(kIdxVel, kIdxAcc2) = c;

  g_c.setZero();
  g_c.block<3, 3>(kIdxOmega1, 0) = eye;
  g_c.block<3, 3>(kIdxOmega2, 3) = eye;
  g_c.block<3, 3>(kIdxAcc1, 6) = eye;
  g_c.block<3, 3>(kIdxAcc2, 9) = eye;
}

void discretize(const SystemMatrix& f_c, const NoiseInputMatrix& g_c,
                const NoiseCovariance& q_c, double dt, SystemMatrix& f_d,
                CovarianceMatrix& q_d) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("discretize: dt must be positive");
  }
  f_d = SystemMatrix::Identity() + f_c * dt;
  const NoiseInputMatrix fg = f_d * g_c;
  q_d = dt * fg * q_c * fg.transpose();
}

FilterState error_injection(const FilterState& x, const ErrorVector& dx) {
  FilterState out = x;
  out.q = quat_multiply(x.q, small_angle_to_quat(dx.segment<3>(kIdxTheta)));
  out.omega1 += dx.segment<3>(kIdxOmega1);
  out.omega2 += dx.segment<3>(kIdxOmega2);
  out.p += dx.segment<3>(kIdxPos);
  out.v += dx.segment<3>(kIdxVel);
  out.a1 += dx.segment<3>(kIdxAcc1);
  out.a2 += dx.segment<3>(kIdxAcc2);
  return out;
}

CovarianceMatrix symmetrized(const CovarianceMatrix& p) {
  return 0.5 * (p + p.transpose());
}

RelativeEkf::RelativeEkf(const FilterState& x0, const CovarianceMatrix& p0,
                         const ProcessNoise& noise)
    : x_(x0), p_(symmetrized(p0)), noise_(noise) {
  x_.q.normalize();
}

void RelativeEkf::predict(double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("predict: dt must be positive");
  }
  const double rate_step =
      std::max(x_.omega1.norm(), x_.omega2.norm()) * dt;
  if (rate_step >= 0.5) {
    throw std::runtime_error(
        "predict: |omega| * dt >= 0.5 rad, reduce the step size");
  }

  SystemMatrix f_c;
  NoiseInputMatrix g_c;
  continuous_jacobians(x_, f_c, g_c);
  SystemMatrix f_d;
  CovarianceMatrix q_d;
  discretize(f_c, g_c, noise_.q_c(), dt, f_d, q_d);

  const StateRates rates = state_derivative(x_);
  const Eigen::Vector4d qv = wxyz(x_.q) + dt * rates.q_dot;
  x_.q = Eigen::Quaterniond(qv(0), qv(1), qv(2), qv(3));
  x_.q.normalize();
  x_.p += dt * rates.p_dot;
  x_.v += dt * rates.v_dot;

  p_ = symmetrized(f_d * p_ * f_d.transpose() + q_d);
}

template <int MeasDim>
void RelativeEkf::apply_update(
    const Eigen::Matrix<double, MeasDim, kErrorDim>& h,
    const Eigen::Matrix<double, MeasDim, 1>& residual,
    const Eigen::Matrix<double, MeasDim, MeasDim>& r) {
  using MeasMatrix = Eigen::Matrix<double, MeasDim, MeasDim>;
  using GainMatrix = Eigen::Matrix<double, kErrorDim, MeasDim>;

  const Eigen::Matrix<double, kErrorDim, MeasDim> pht = p_ * h.transpose();
  const MeasMatrix s = h * pht + r;
  const Eigen::LLT<MeasMatrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("filter update: singular innovation covariance");
  }
  const GainMatrix k = llt.solve(pht.transpose()).transpose();

  const ErrorVector dx = k * residual;
  const CovarianceMatrix ikh = CovarianceMatrix::Identity() - k * h;
  p_ = symmetrized(ikh * p_ * ikh.transpose() + k * r * k.transpose());
  x_ = error_injection(x_, dx);
}

void RelativeEkf::imu_update(const ImuPair& m) {
  if ((m.variance.array() <= 0.0).any()) {
    throw std::invalid_argument("imu_update: R must be positive definite");
  }
  Eigen::Matrix<double, kImuDim, kErrorDim> h;
  h.setZero();
  h.block<3, 3>(0, kIdxOmega1).setIdentity();
  h.block<3, 3>(3, kIdxOmega2).setIdentity();
  h.block<3, 3>(6, kIdxAcc1).setIdentity();
  h.block<3, 3>(9, kIdxAcc2).setIdentity();

  Eigen::Matrix<double, kImuDim, 1> residual;
  residual.segment<3>(0) = m.omega1 - x_.omega1;
  residual.segment<3>(3) = m.omega2 - x_.omega2;
  residual.segment<3>(6) = m.accel1 - x_.a1;
  residual.segment<3>(9) = m.accel2 - x_.a2;

  const Eigen::Matrix<double, kImuDim, kImuDim> r = m.variance.asDiagonal();
  apply_update<kImuDim>(h, residual, r);
}

void RelativeEkf::pose_update(const FusedPoseMeasurement& m) {
  Eigen::Matrix<double, kPoseDim, kErrorDim> h;
  h.setZero();
  h.block<3, 3>(0, kIdxTheta).setIdentity();
  h.block<3, 3>(3, kIdxPos).setIdentity();

  Eigen::Matrix<double, kPoseDim, 1> residual;
  residual.segment<3>(0) =
      quat_to_small_angle(x_.q.conjugate() * m.q);
  residual.segment<3>(3) = m.p - x_.p;

  const PoseCovariance r = 0.5 * (m.cov + m.cov.transpose());
  apply_update<kPoseDim>(h, residual, r);
}

template void RelativeEkf::apply_update<kImuDim>(
    const Eigen::Matrix<double, kImuDim, kErrorDim>&,
    const Eigen::Matrix<double, kImuDim, 1>&,
    const Eigen::Matrix<double, kImuDim, kImuDim>&);
template void RelativeEkf::apply_update<kPoseDim>(
    const Eigen::Matrix<double, kPoseDim, kErrorDim>&,
    const Eigen::Matrix<double, kPoseDim, 1>&,
    const Eigen::Matrix<double, kPoseDim, kPoseDim>&);

}  // namespace flexstereo
