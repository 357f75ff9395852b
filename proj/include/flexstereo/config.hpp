#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flexstereo/depth.hpp"
#include "flexstereo/sim.hpp"

// Experiment configuration: flat text key-value files with dotted section
// keys (`sim.duration = 60`, `#` comments). Every key has a default; see
// the README for the full list.

namespace flexstereo {

enum class EstimatorMode { kFixed, kVisualPrior, kImuPrior, kFull };

std::string mode_name(EstimatorMode mode);
EstimatorMode parse_mode(const std::string& name);

struct FilterTuning {
  double sigma_omega_rw = 0.5;   // rad/s/sqrt(s)
  double sigma_accel_rw = 10.0;  // m/s^2/sqrt(s)
  double p0_omega = 1.0;         // (rad/s)^2
  double p0_vel = 2.5;           // (m/s)^2
  double p0_accel = 1000.0;      // (m/s^2)^2
};

struct ExperimentConfig {
  double duration = 60.0;     // s
  double imu_rate = 100.0;    // Hz
  double vision_rate = 10.0;  // Hz
  uint64_t seed = 1;
  int substeps = 10;

  TrajectoryConfig trajectory;
  WingParams wing;
  RigGeometry rig;
  DisturbanceConfig disturbance;
  ImuNoiseConfig imu;
  VisionNoiseConfig vision;

  double gate_k = 2.0;
  double prior_inflation = 1.10;
  double prior_sigma_floor = 1e-6;
  double calib_duration = 120.0;  // s

  EstimatorMode mode = EstimatorMode::kFull;
  std::vector<double> noise_multipliers = {1, 2, 4, 8, 16, 32};

  FilterTuning filter;
  double warmup = 5.0;  // s excluded from all error statistics

  bool depth_enabled = true;
  int depth_stride = 1;  // evaluate every n-th vision epoch
  double v_thresh = 1.0;
  CameraIntrinsics camera;
  SceneConfig scene;

  // Derived quantities.
  int imu_steps() const;
  int vision_every() const;  // IMU steps per vision epoch

  // Throws std::invalid_argument describing every violated constraint.
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);

// Apply a single dotted-key override ("sim.seed = 7" or "sim.seed=7").
void apply_config_line(ExperimentConfig& cfg, const std::string& line);

// Render the full configuration in the same key-value syntax.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace flexstereo
