#include "flexstereo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <stdexcept>
#include <thread>

#include "flexstereo/depth.hpp"
#include "flexstereo/filter.hpp"

namespace flexstereo {

namespace {

FusedPoseMeasurement artificial_prior_measurement(const WingPrior& prior) {
  FusedPoseMeasurement m;
  m.q = prior.q_mu;
  m.p = prior.p_mu;
  m.cov = prior.covariance();
  return m;
}

RelativeEkf make_filter(const ExperimentConfig& cfg, const WingPrior& prior) {
  FilterState x0;
  x0.q = prior.q_mu;
  x0.p = prior.p_mu;

  CovarianceMatrix p0 = CovarianceMatrix::Zero();
  p0.diagonal().segment<3>(kIdxTheta) = prior.sigma_theta.cwiseAbs2();
  p0.diagonal().segment<3>(kIdxPos) = prior.sigma_p.cwiseAbs2();
  p0.diagonal().segment<3>(kIdxOmega1).setConstant(cfg.filter.p0_omega);
  p0.diagonal().segment<3>(kIdxOmega2).setConstant(cfg.filter.p0_omega);
  p0.diagonal().segment<3>(kIdxVel).setConstant(cfg.filter.p0_vel);
  p0.diagonal().segment<3>(kIdxAcc1).setConstant(cfg.filter.p0_accel);
  p0.diagonal().segment<3>(kIdxAcc2).setConstant(cfg.filter.p0_accel);

  ProcessNoise noise;
  noise.sigma_omega1.setConstant(cfg.filter.sigma_omega_rw);
  noise.sigma_omega2.setConstant(cfg.filter.sigma_omega_rw);
  noise.sigma_accel1.setConstant(cfg.filter.sigma_accel_rw);
  noise.sigma_accel2.setConstant(cfg.filter.sigma_accel_rw);

  return RelativeEkf(x0, p0, noise);
}

double median_of(std::vector<double> values) {
  if (values.empty()) {
    return 0.0;
  }
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    const auto lower = std::max_element(values.begin(), values.begin() + mid);
    m = 0.5 * (m + *lower);
  }
  return m;
}

}  // namespace

Eigen::Matrix<double, 6, 1> pose_deviation_vector(
    const RelativePose& truth, const RelativePose& estimate) {
  Eigen::Matrix<double, 6, 1> dev;
  dev.head<3>() =
      quat_to_small_angle(truth.rotation.conjugate() * estimate.rotation);
  dev.tail<3>() = estimate.translation - truth.translation;
  return dev;
}

double normalized_rmse(const Eigen::Matrix<double, 6, 1>& rmse,
                       const Eigen::Matrix<double, 6, 1>& sigma) {
  const Eigen::Matrix<double, 6, 1> scaled = rmse.cwiseQuotient(sigma);
  return std::sqrt(scaled.squaredNorm() / 6.0);
}

Aggregates aggregate_series(const std::vector<StepRecord>& series,
                            const std::vector<DepthRecord>& depth_series,
                            const WingPrior& normalization, double warmup) {
  Aggregates agg;
  Eigen::Matrix<double, 6, 1> sigma;
  sigma << normalization.sigma_theta, normalization.sigma_p;

  Eigen::Matrix<double, 6, 1> sum_sq = Eigen::Matrix<double, 6, 1>::Zero();
  std::vector<double> step_normalized;
  step_normalized.reserve(series.size());
  for (const StepRecord& r : series) {
    if (r.t <= warmup) {
      continue;
    }
    const Eigen::Matrix<double, 6, 1> dev =
        pose_deviation_vector(r.truth, r.estimate);
    sum_sq += dev.cwiseAbs2();
    const Eigen::Matrix<double, 6, 1> scaled = dev.cwiseQuotient(sigma);
    step_normalized.push_back(std::sqrt(scaled.squaredNorm() / 6.0));
    ++agg.steps_used;
  }
  if (agg.steps_used > 0) {
    const Eigen::Matrix<double, 6, 1> rmse =
        (sum_sq / static_cast<double>(agg.steps_used)).cwiseSqrt();
    agg.rot_rmse_deg = rmse.head<3>() * (180.0 / M_PI);
    agg.trans_rmse_mm = rmse.tail<3>() * 1000.0;
    agg.normalized_rmse = normalized_rmse(rmse, sigma);
    agg.median_step_normalized = median_of(step_normalized);
  }

  for (const DepthRecord& r : depth_series) {
    agg.mean_dz_est += r.dz_est;
    agg.mean_dz_fixed += r.dz_fixed;
    agg.mean_dnum_est += r.dnum_est;
    agg.mean_dnum_fixed += r.dnum_fixed;
    agg.mean_gt_depth += r.gt_mean_depth;
    ++agg.depth_frames;
  }
  if (agg.depth_frames > 0) {
    const double n = static_cast<double>(agg.depth_frames);
    agg.mean_dz_est /= n;
    agg.mean_dz_fixed /= n;
    agg.mean_dnum_est /= n;
    agg.mean_dnum_fixed /= n;
    agg.mean_gt_depth /= n;
  }
  return agg;
}

SimParams make_sim_params(const ExperimentConfig& cfg) {
  SimParams sp;
  sp.trajectory = cfg.trajectory;
  sp.wing = cfg.wing;
  sp.geometry = cfg.rig;
  sp.disturbance = cfg.disturbance;
  sp.duration = cfg.duration;
  sp.imu_rate = cfg.imu_rate;
  sp.substeps = cfg.substeps;
  sp.seed = cfg.seed;
  return sp;
}

WingPrior calibrate_from_sim(const ExperimentConfig& cfg) {
  SimParams sp = make_sim_params(cfg);
  sp.duration = cfg.calib_duration;
  sp.seed = derive_seed(cfg.seed, "calib");
  Simulator sim(sp);
  const int steps =
      static_cast<int>(std::llround(cfg.calib_duration * cfg.imu_rate));
  std::vector<RelativePose> samples;
  samples.reserve(static_cast<size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    sim.advance();
    samples.push_back(sim.sample().t_true);
  }
  return calibrate_prior(samples, cfg.prior_sigma_floor);
}

SimStream generate_stream(const ExperimentConfig& cfg) {
  Simulator sim(make_sim_params(cfg));

  ImuNoiseConfig imu_cfg = cfg.imu;
  imu_cfg.rate = cfg.imu_rate;
  char imu_tag[48];
  std::snprintf(imu_tag, sizeof(imu_tag), "imu:%.17g", cfg.imu.multiplier);
  ImuSynthesizer imu_synth(imu_cfg, derive_seed(cfg.seed, imu_tag));
  VisionSynthesizer vision_synth(cfg.vision,
                                 derive_seed(cfg.seed, "vision"));

  SimStream stream;
  stream.imu_rate = cfg.imu_rate;
  stream.vision_rate = cfg.vision_rate;
  stream.gyro_var = cfg.imu.gyro_var;
  stream.accel_var = cfg.imu.accel_var;
  stream.multiplier = cfg.imu.multiplier;

  const int steps = cfg.imu_steps();
  const int vision_every = cfg.vision_every();
  stream.truth.reserve(static_cast<size_t>(steps));
  stream.imu.reserve(static_cast<size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    sim.advance();
    const SimSample s = sim.sample();
    stream.truth.push_back(TruthRecord{s.t, s.t_true, s.left, s.right});
    stream.imu.push_back(imu_synth.synth(s));
    if (k % vision_every == 0) {
      stream.vision.push_back(vision_synth.synth(s.t, s.t_true));
    }
  }
  return stream;
}

RunReport run_on_stream(const ExperimentConfig& cfg, const SimStream& stream,
                        const WingPrior& prior_calibrated) {
  const auto t_start = std::chrono::steady_clock::now();
  const WingPrior prior = prior_calibrated.inflated(cfg.prior_inflation);
  const GateConfig gate_cfg{cfg.gate_k};

  RunReport report;
  report.mode = mode_name(cfg.mode);
  report.seed = cfg.seed;
  report.imu_rate = cfg.imu_rate;
  report.warmup = cfg.warmup;
  report.prior_calibrated = prior_calibrated;
  report.prior_used = prior;

  const int steps = static_cast<int>(stream.imu.size());
  const int vision_every = cfg.vision_every();
  const double dt = 1.0 / stream.imu_rate;

  const bool use_filter = cfg.mode == EstimatorMode::kImuPrior ||
                          cfg.mode == EstimatorMode::kFull;
  RelativeEkf ekf = make_filter(cfg, prior);
  RelativePose held = prior.mean();  // fixed / visual+prior estimate

  report.series.reserve(static_cast<size_t>(steps));
  size_t vision_index = 0;
  for (int k = 1; k <= steps; ++k) {
    const ImuPair& m = stream.imu[static_cast<size_t>(k - 1)];
    if (use_filter) {
      ekf.predict(dt);
      ekf.imu_update(m);
    }
    if (k % vision_every == 0 && vision_index < stream.vision.size()) {
      const VisualMeasurement& vm = stream.vision[vision_index++];
      switch (cfg.mode) {
        case EstimatorMode::kFixed:
          break;
        case EstimatorMode::kVisualPrior:
          {
            const FusedPoseMeasurement fused = gate(prior, vm, gate_cfg);
            held = RelativePose{fused.q, fused.p};
          }
          break;
        case EstimatorMode::kImuPrior:
          ekf.pose_update(artificial_prior_measurement(prior));
          break;
        case EstimatorMode::kFull:
          ekf.pose_update(gate(prior, vm, gate_cfg));
          break;
      }
    }
    StepRecord rec;
    rec.t = m.t;
    rec.truth = stream.truth[static_cast<size_t>(k - 1)].t_true;
    rec.estimate = use_filter
                       ? RelativePose{ekf.state().q, ekf.state().p}
                       : held;
    report.series.push_back(rec);
  }

  if (cfg.depth_enabled) {
    report.depth_series =
        compute_depth_series(cfg, report.series, prior.mean());
  }

  report.aggregates = aggregate_series(report.series, report.depth_series,
                                       report.prior_calibrated, cfg.warmup);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

std::vector<DepthRecord> compute_depth_series(
    const ExperimentConfig& cfg, const std::vector<StepRecord>& series,
    const RelativePose& fixed_pose) {
  std::vector<DepthRecord> out;
  const RelativePose fixed_cam = rig_to_camera(fixed_pose);
  const int vision_every = cfg.vision_every();
  const int steps = static_cast<int>(series.size());
  long epoch = 0;
  for (int k = vision_every; k <= steps; k += vision_every) {
    const StepRecord& rec = series[static_cast<size_t>(k - 1)];
    const long frame = epoch++;
    if (rec.t <= cfg.warmup || frame % cfg.depth_stride != 0) {
      continue;
    }
    const RelativePose true_cam = rig_to_camera(rec.truth);
    const RelativePose est_cam = rig_to_camera(rec.estimate);
    const double phase = cfg.scene.scroll * static_cast<double>(frame);
    const DepthMap gt = scene_depth_map(
        cfg.camera, rectify_pair(true_cam).baseline, cfg.scene, phase);
    const DepthMap est_map =
        synth_depth_map(gt, true_cam, est_cam, cfg.camera, cfg.v_thresh);
    const DepthMap fixed_map =
        synth_depth_map(gt, true_cam, fixed_cam, cfg.camera, cfg.v_thresh);
    const DepthErrorReport est_err = depth_error_report(gt, est_map);
    const DepthErrorReport fixed_err = depth_error_report(gt, fixed_map);

    DepthRecord d;
    d.t = rec.t;
    d.dz_est = est_err.accuracy_m;
    d.dz_fixed = fixed_err.accuracy_m;
    d.dnum_est = est_err.completeness;
    d.dnum_fixed = fixed_err.completeness;
    d.overlap_est = est_err.overlap_count;
    d.overlap_fixed = fixed_err.overlap_count;
    long valid = 0;
    double sum = 0.0;
    for (int row = 0; row < gt.height; ++row) {
      for (int col = 0; col < gt.width; ++col) {
        if (gt.valid(row, col)) {
          ++valid;
          sum += gt.at(row, col);
        }
      }
    }
    d.gt_mean_depth = valid > 0 ? sum / static_cast<double>(valid) : 0.0;
    out.push_back(d);
  }
  return out;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.imu_steps() < 1) {
    throw std::invalid_argument("run_experiment: empty run");
  }
  const auto t_start = std::chrono::steady_clock::now();
  const WingPrior prior_calibrated = calibrate_from_sim(cfg);
  const SimStream stream = generate_stream(cfg);
  RunReport report = run_on_stream(cfg, stream, prior_calibrated);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

std::vector<SweepRow> noise_sweep(const ExperimentConfig& cfg,
                                  const std::vector<double>& multipliers) {
  for (const double m : multipliers) {
    if (m < 1.0) {
      throw std::invalid_argument("noise_sweep: multipliers must be >= 1");
    }
  }
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(multipliers.size());
  for (const double m : multipliers) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.imu.multiplier = m;
    run_cfg.depth_enabled = false;
    jobs.push_back(std::async(std::launch::async, [run_cfg]() {
      const RunReport report = run_experiment(run_cfg);
      return SweepRow{run_cfg.imu.multiplier,
                      report.aggregates.median_step_normalized,
                      report.aggregates.normalized_rmse};
    }));
  }
  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& job : jobs) {
    rows.push_back(job.get());
  }
  return rows;
}

}  // namespace flexstereo
