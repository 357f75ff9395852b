#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "flexstereo/config.hpp"
#include "flexstereo/io.hpp"
#include "flexstereo/wing_prior.hpp"

// Experiment orchestration: simulate -> filter -> evaluate, with the metric
// aggregation used by the report files. All statistics skip the configured
// warm-up window (the filter is initialized from the prior with zero
// kinematics, so early estimates are poor until the velocity and
// acceleration states converge).

namespace flexstereo {

struct StepRecord {
  double t = 0.0;
  RelativePose truth;
  RelativePose estimate;
};

struct DepthRecord {
  double t = 0.0;
  double dz_est = 0.0;      // accuracy with the estimated baseline [m]
  double dz_fixed = 0.0;    // accuracy with the fixed (prior-mean) baseline
  double dnum_est = 0.0;    // completeness (fraction)
  double dnum_fixed = 0.0;
  double gt_mean_depth = 0.0;
  long overlap_est = 0;
  long overlap_fixed = 0;
};

struct Aggregates {
  Eigen::Vector3d rot_rmse_deg{Eigen::Vector3d::Zero()};
  Eigen::Vector3d trans_rmse_mm{Eigen::Vector3d::Zero()};
  double normalized_rmse = 0.0;
  double median_step_normalized = 0.0;
  long steps_used = 0;
  double mean_dz_est = 0.0;
  double mean_dz_fixed = 0.0;
  double mean_dnum_est = 0.0;
  double mean_dnum_fixed = 0.0;
  double mean_gt_depth = 0.0;
  long depth_frames = 0;
};

struct RunReport {
  std::string mode;
  uint64_t seed = 0;
  double imu_rate = 100.0;
  double warmup = 5.0;
  WingPrior prior_calibrated;  // raw sigmas, used for normalization
  WingPrior prior_used;        // inflated copy fed to the estimator
  std::vector<StepRecord> series;
  std::vector<DepthRecord> depth_series;
  Aggregates aggregates;
  double wall_time_s = 0.0;  // console diagnostics only, never emitted
};

// Deviation of the estimate from the truth, [dtheta(rad); dp(m)].
Eigen::Matrix<double, 6, 1> pose_deviation_vector(const RelativePose& truth,
                                                  const RelativePose& estimate);

// RMS over the six per-axis RMSE components, each scaled by the prior sigma.
double normalized_rmse(const Eigen::Matrix<double, 6, 1>& rmse,
                       const Eigen::Matrix<double, 6, 1>& sigma);

// Shared by run_experiment and the report re-ingestion path.
Aggregates aggregate_series(const std::vector<StepRecord>& series,
                            const std::vector<DepthRecord>& depth_series,
                            const WingPrior& normalization, double warmup);

// Calibrates the wing prior from a dedicated simulation segment (derived
// seed, truth poses at the IMU rate), without inflation.
WingPrior calibrate_from_sim(const ExperimentConfig& cfg);

SimParams make_sim_params(const ExperimentConfig& cfg);

// Full sensor stream for one run. The gust/trajectory realization depends
// only on the seed; the IMU noise seed also hashes the noise multiplier so
// sweep runs share the wing motion but draw independent noise.
SimStream generate_stream(const ExperimentConfig& cfg);

RunReport run_experiment(const ExperimentConfig& cfg);

// Replay path: run the configured estimator on a previously dumped stream.
RunReport run_on_stream(const ExperimentConfig& cfg, const SimStream& stream,
                        const WingPrior& prior_calibrated);

// Depth metrics at the configured vision epochs (post warm-up, honoring
// depth.stride) for the recorded estimates versus the fixed baseline.
std::vector<DepthRecord> compute_depth_series(
    const ExperimentConfig& cfg, const std::vector<StepRecord>& series,
    const RelativePose& fixed_pose);

struct SweepRow {
  double multiplier = 1.0;
  double median_step_normalized = 0.0;
  double normalized_rmse = 0.0;
};

// One full-pipeline run per multiplier (parallel workers, deterministic
// result order); depth evaluation is skipped for speed.
std::vector<SweepRow> noise_sweep(const ExperimentConfig& cfg,
                                  const std::vector<double>& multipliers);

}  // namespace flexstereo
