#pragma once

#include <Eigen/Core>
#include <span>
#include <string>

#include "flexstereo/filter.hpp"
#include "flexstereo/geometry.hpp"

// Probabilistic wing model: a nominal baseline transform plus independent
// per-axis Gaussian deviations, calibrated from observed relative poses.
// Deviations are expressed as [dtheta; dp] with
//   q = q_mu (*) exp(dtheta),   p = p_mu + dp.

namespace flexstereo {

struct WingPrior {
  Eigen::Quaterniond q_mu{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d p_mu{Eigen::Vector3d::Zero()};
  Eigen::Vector3d sigma_theta{Eigen::Vector3d::Ones()};  // rad
  Eigen::Vector3d sigma_p{Eigen::Vector3d::Ones()};      // m

  // Sigma_c = diag([sigma_theta^2; sigma_p^2])
  PoseCovariance covariance() const;
  RelativePose mean() const { return RelativePose{q_mu, p_mu}; }
  // Copy with variances scaled by `factor` (calibration safety margin).
  WingPrior inflated(double factor) const;
};

// One visual relative-pose estimate: orientation plus translation direction
// (unit vector, scale unobservable). `cov` is the reported 6x6 covariance in
// [dtheta; dp] order.
struct VisualMeasurement {
  double t = 0.0;
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d dir{Eigen::Vector3d::UnitX()};
  PoseCovariance cov = PoseCovariance::Zero();
};

struct GateConfig {
  double k = 2.0;  // std-dev multiple
};

struct PoseDeviation {
  Eigen::Vector3d theta{Eigen::Vector3d::Zero()};  // rad
  Eigen::Vector3d p{Eigen::Vector3d::Zero()};      // m
};

// Iterative chordal mean for the rotation, arithmetic mean for the
// translation, unbiased per-axis sample standard deviations. Sigmas are
// floored at `sigma_floor` so Sigma_c stays invertible. Throws for fewer
// than two samples.
WingPrior calibrate_prior(std::span<const RelativePose> samples,
                          double sigma_floor = 1e-6);

PoseDeviation deviation(const WingPrior& prior, const RelativePose& pose);

// MAP fusion of a visual estimate with the prior. The measured direction is
// scaled by |p_mu| before differencing: monocular epipolar geometry cannot
// observe scale, the prior supplies it.
//   [dtheta_f; dp_f] = Sigma_c (Sigma_c + Sigma_v)^-1 [dtheta_v; dp_v]
//   Sigma_f = Sigma_c - Sigma_c (Sigma_c + Sigma_v)^-1 Sigma_c
FusedPoseMeasurement fuse_with_prior(const WingPrior& prior,
                                     const VisualMeasurement& m);

// Outlier gate: reject when any axis deviation exceeds k standard deviations
// of the (diagonal of the) measurement covariance, strictly. A rejected
// measurement is replaced by the artificial prior measurement
// (q_mu, p_mu, Sigma_c), so the filter receives an update every epoch.
FusedPoseMeasurement gate(const WingPrior& prior, const VisualMeasurement& m,
                          const GateConfig& cfg);

// Flat key-value serialization (q_mu as w x y z, p_mu in m, sigmas per axis).
void save_prior(const WingPrior& prior, const std::string& path);
WingPrior load_prior(const std::string& path);

}  // namespace flexstereo
