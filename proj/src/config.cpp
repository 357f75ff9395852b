#include "flexstereo/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace flexstereo {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key +
                                ": '" + value + "'");
  }
}

std::vector<double> parse_list(const std::string& key,
                               const std::string& value) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(parse_double(key, item));
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::vector<Entry> build_registry() {
  std::vector<Entry> reg;
  auto add_double = [&reg](const std::string& key, auto member) {
    reg.push_back({key,
                   [key, member](ExperimentConfig& c, const std::string& v) {
                     c.*member = parse_double(key, v);
                   },
                   [member](const ExperimentConfig& c) {
                     return format_double(c.*member);
                   }});
  };
  auto add_sub = [&reg](const std::string& key, auto section, auto member,
                        double scale = 1.0) {
    reg.push_back({key,
                   [key, section, member, scale](ExperimentConfig& c,
                                                 const std::string& v) {
                     (c.*section).*member = parse_double(key, v) * scale;
                   },
                   [section, member, scale](const ExperimentConfig& c) {
                     return format_double(((c.*section).*member) / scale);
                   }});
  };

  add_double("sim.duration", &ExperimentConfig::duration);
  add_double("sim.imu_rate", &ExperimentConfig::imu_rate);
  add_double("sim.vision_rate", &ExperimentConfig::vision_rate);
  reg.push_back({"sim.seed",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.seed = static_cast<uint64_t>(
                       std::llround(parse_double("sim.seed", v)));
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.seed);
                 }});
  reg.push_back({"sim.substeps",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.substeps = static_cast<int>(
                       std::llround(parse_double("sim.substeps", v)));
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.substeps);
                 }});

  add_sub("traj.period", &ExperimentConfig::trajectory,
          &TrajectoryConfig::period);
  add_sub("traj.amp_x", &ExperimentConfig::trajectory,
          &TrajectoryConfig::amp_x);
  add_sub("traj.amp_y", &ExperimentConfig::trajectory,
          &TrajectoryConfig::amp_y);
  add_sub("traj.altitude", &ExperimentConfig::trajectory,
          &TrajectoryConfig::altitude);
  add_sub("traj.yaw_amp", &ExperimentConfig::trajectory,
          &TrajectoryConfig::yaw_amp);
  add_sub("traj.pitch_amp", &ExperimentConfig::trajectory,
          &TrajectoryConfig::pitch_amp);
  add_sub("traj.roll_amp", &ExperimentConfig::trajectory,
          &TrajectoryConfig::roll_amp);

  add_sub("wing.inertia_roll", &ExperimentConfig::wing,
          &WingParams::inertia_roll);
  add_sub("wing.stiffness_roll", &ExperimentConfig::wing,
          &WingParams::stiffness_roll);
  add_sub("wing.damping_roll", &ExperimentConfig::wing,
          &WingParams::damping_roll);
  add_sub("wing.inertia_pitch", &ExperimentConfig::wing,
          &WingParams::inertia_pitch);
  add_sub("wing.stiffness_pitch", &ExperimentConfig::wing,
          &WingParams::stiffness_pitch);
  add_sub("wing.damping_pitch", &ExperimentConfig::wing,
          &WingParams::damping_pitch);

  add_sub("rig.root_span", &ExperimentConfig::rig, &RigGeometry::root_span);
  add_sub("rig.inner_span", &ExperimentConfig::rig, &RigGeometry::inner_span);
  add_sub("rig.outer_span", &ExperimentConfig::rig, &RigGeometry::outer_span);
  add_sub("rig.chord_offset", &ExperimentConfig::rig,
          &RigGeometry::chord_offset);
  add_sub("rig.toe_in_deg", &ExperimentConfig::rig, &RigGeometry::toe_in,
          kDegToRad);

  add_sub("dist.periodic_amp", &ExperimentConfig::disturbance,
          &DisturbanceConfig::periodic_amp);
  add_sub("dist.periodic_freq", &ExperimentConfig::disturbance,
          &DisturbanceConfig::periodic_freq);
  add_sub("dist.gust_mean", &ExperimentConfig::disturbance,
          &DisturbanceConfig::gust_mean);
  add_sub("dist.gust_std", &ExperimentConfig::disturbance,
          &DisturbanceConfig::gust_std);
  add_sub("dist.gust_freq", &ExperimentConfig::disturbance,
          &DisturbanceConfig::gust_freq);
  add_sub("dist.gust_duration", &ExperimentConfig::disturbance,
          &DisturbanceConfig::gust_duration);

  add_sub("imu.gyro_var", &ExperimentConfig::imu, &ImuNoiseConfig::gyro_var);
  add_sub("imu.accel_var", &ExperimentConfig::imu, &ImuNoiseConfig::accel_var);
  add_sub("imu.multiplier", &ExperimentConfig::imu,
          &ImuNoiseConfig::multiplier);

  add_sub("vision.sigma_rot_deg", &ExperimentConfig::vision,
          &VisionNoiseConfig::sigma_rot, kDegToRad);
  add_sub("vision.sigma_trans_m", &ExperimentConfig::vision,
          &VisionNoiseConfig::sigma_trans);
  add_sub("vision.cov_inflation", &ExperimentConfig::vision,
          &VisionNoiseConfig::cov_inflation);
  add_sub("vision.outlier_prob", &ExperimentConfig::vision,
          &VisionNoiseConfig::outlier_prob);
  add_sub("vision.outlier_scale", &ExperimentConfig::vision,
          &VisionNoiseConfig::outlier_scale);

  add_double("gate.k", &ExperimentConfig::gate_k);
  add_double("prior.inflation", &ExperimentConfig::prior_inflation);
  add_double("prior.sigma_floor", &ExperimentConfig::prior_sigma_floor);
  add_double("prior.calib_duration", &ExperimentConfig::calib_duration);

  add_sub("filter.sigma_omega_rw", &ExperimentConfig::filter,
          &FilterTuning::sigma_omega_rw);
  add_sub("filter.sigma_accel_rw", &ExperimentConfig::filter,
          &FilterTuning::sigma_accel_rw);
  add_sub("filter.p0_omega", &ExperimentConfig::filter,
          &FilterTuning::p0_omega);
  add_sub("filter.p0_vel", &ExperimentConfig::filter, &FilterTuning::p0_vel);
  add_sub("filter.p0_accel", &ExperimentConfig::filter,
          &FilterTuning::p0_accel);

  reg.push_back({"eval.mode",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.mode = parse_mode(trim(v));
                 },
                 [](const ExperimentConfig& c) { return mode_name(c.mode); }});
  add_double("eval.warmup", &ExperimentConfig::warmup);

  reg.push_back({"depth.enabled",
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "true" || t == "1") {
                     c.depth_enabled = true;
                   } else if (t == "false" || t == "0") {
                     c.depth_enabled = false;
                   } else {
                     throw std::invalid_argument(
                         "config: depth.enabled must be true/false");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.depth_enabled ? "true" : "false");
                 }});
  reg.push_back({"depth.stride",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.depth_stride = static_cast<int>(
                       std::llround(parse_double("depth.stride", v)));
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.depth_stride);
                 }});
  add_double("depth.v_thresh", &ExperimentConfig::v_thresh);
  add_sub("depth.focal", &ExperimentConfig::camera, &CameraIntrinsics::f);
  reg.push_back({"depth.width",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.camera.width = static_cast<int>(
                       std::llround(parse_double("depth.width", v)));
                   c.camera.cx = 0.5 * (c.camera.width - 1);
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.camera.width);
                 }});
  reg.push_back({"depth.height",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.camera.height = static_cast<int>(
                       std::llround(parse_double("depth.height", v)));
                   c.camera.cy = 0.5 * (c.camera.height - 1);
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.camera.height);
                 }});

  add_sub("scene.near", &ExperimentConfig::scene, &SceneConfig::near);
  add_sub("scene.far", &ExperimentConfig::scene, &SceneConfig::far);
  add_sub("scene.ramp_top", &ExperimentConfig::scene, &SceneConfig::ramp_top);
  add_sub("scene.ramp_bottom", &ExperimentConfig::scene,
          &SceneConfig::ramp_bottom);
  add_sub("scene.amp1", &ExperimentConfig::scene, &SceneConfig::amp1);
  add_sub("scene.amp2", &ExperimentConfig::scene, &SceneConfig::amp2);
  add_sub("scene.scroll", &ExperimentConfig::scene, &SceneConfig::scroll);

  reg.push_back(
      {"sweep.multipliers",
       [](ExperimentConfig& c, const std::string& v) {
         c.noise_multipliers = parse_list("sweep.multipliers", v);
       },
       [](const ExperimentConfig& c) {
         std::string out;
         for (size_t i = 0; i < c.noise_multipliers.size(); ++i) {
           if (i > 0) {
             out += ",";
           }
           out += format_double(c.noise_multipliers[i]);
         }
         return out;
       }});
  return reg;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> reg = build_registry();
  return reg;
}

}  // namespace

std::string mode_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::kFixed:
      return "fixed";
    case EstimatorMode::kVisualPrior:
      return "visual+prior";
    case EstimatorMode::kImuPrior:
      return "imu+prior";
    case EstimatorMode::kFull:
      return "full";
  }
  return "full";
}

EstimatorMode parse_mode(const std::string& name) {
  std::string n = name;
  for (char& c : n) {
    if (c == '_' || c == '-') {
      c = '+';
    }
  }
  if (n == "fixed") {
    return EstimatorMode::kFixed;
  }
  if (n == "visual+prior") {
    return EstimatorMode::kVisualPrior;
  }
  if (n == "imu+prior") {
    return EstimatorMode::kImuPrior;
  }
  if (n == "full") {
    return EstimatorMode::kFull;
  }
  throw std::invalid_argument(
      "unknown estimator mode '" + name +
      "' (expected fixed, visual+prior, imu+prior or full)");
}

int ExperimentConfig::imu_steps() const {
  return static_cast<int>(std::llround(duration * imu_rate));
}

int ExperimentConfig::vision_every() const {
  return static_cast<int>(std::llround(imu_rate / vision_rate));
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) {
      problems.push_back(what);
    }
  };
  require(duration > 0.0, "sim.duration must be > 0");
  require(imu_rate > 0.0, "sim.imu_rate must be > 0");
  require(vision_rate > 0.0, "sim.vision_rate must be > 0");
  require(vision_rate <= imu_rate, "sim.vision_rate must be <= sim.imu_rate");
  if (imu_rate > 0.0 && vision_rate > 0.0) {
    const double ratio = imu_rate / vision_rate;
    require(std::abs(ratio - std::round(ratio)) < 1e-9,
            "sim.imu_rate must be an integer multiple of sim.vision_rate");
  }
  require(substeps >= 1, "sim.substeps must be >= 1");
  require(imu_rate * substeps >= 999.0,
          "wing ODE substep must be <= 1e-3 s (raise sim.substeps)");
  require(trajectory.period > 0.0, "traj.period must be > 0");
  require(wing.inertia_roll > 0.0 && wing.inertia_pitch > 0.0,
          "wing inertias must be > 0");
  require(wing.stiffness_roll > 0.0 && wing.stiffness_pitch > 0.0,
          "wing stiffnesses must be > 0");
  require(wing.damping_roll >= 0.0 && wing.damping_pitch >= 0.0,
          "wing dampings must be >= 0");
  require(rig.baseline() > 0.0, "rig baseline must be > 0");
  require(disturbance.periodic_freq > 0.0 && disturbance.gust_freq > 0.0,
          "disturbance frequencies must be > 0");
  require(disturbance.periodic_amp >= 0.0 && disturbance.gust_mean >= 0.0 &&
              disturbance.gust_std >= 0.0,
          "disturbance magnitudes must be >= 0");
  require(imu.gyro_var >= 0.0 && imu.accel_var >= 0.0,
          "IMU variances must be >= 0");
  require(imu.multiplier > 0.0, "imu.multiplier must be > 0");
  require(vision.sigma_rot >= 0.0 && vision.sigma_trans >= 0.0,
          "vision noise must be >= 0");
  require(vision.cov_inflation > 0.0, "vision.cov_inflation must be > 0");
  require(vision.outlier_prob >= 0.0 && vision.outlier_prob <= 1.0,
          "vision.outlier_prob must be in [0, 1]");
  require(gate_k > 0.0, "gate.k must be > 0");
  require(prior_inflation > 0.0, "prior.inflation must be > 0");
  require(prior_sigma_floor > 0.0, "prior.sigma_floor must be > 0");
  require(calib_duration > 0.0, "prior.calib_duration must be > 0");
  require(filter.sigma_omega_rw > 0.0 && filter.sigma_accel_rw > 0.0,
          "filter random-walk sigmas must be > 0");
  require(warmup >= 0.0, "eval.warmup must be >= 0");
  require(warmup < duration, "eval.warmup must be < sim.duration");
  require(depth_stride >= 1, "depth.stride must be >= 1");
  require(v_thresh > 0.0, "depth.v_thresh must be > 0");
  require(camera.f > 0.0, "depth.focal must be > 0");
  require(camera.width > 0 && camera.height > 0,
          "depth image dimensions must be > 0");
  require(scene.near > 0.0 && scene.far > scene.near,
          "scene depth range must satisfy 0 < near < far");
  for (const double m : noise_multipliers) {
    require(m >= 1.0, "sweep.multipliers entries must be >= 1");
  }

  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const std::string& p : problems) {
      msg += "\n  - " + p;
    }
    throw std::invalid_argument(msg);
  }
}

void apply_config_line(ExperimentConfig& cfg, const std::string& raw) {
  const std::string line = trim(raw);
  if (line.empty() || line[0] == '#') {
    return;
  }
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config: expected 'key = value', got '" +
                                line + "'");
  }
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  for (const Entry& e : registry()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read config file " + path);
  }
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      apply_config_line(cfg, line);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) {
    out += e.key;
    out += " = ";
    out += e.get(cfg);
    out += "\n";
  }
  return out;
}

}  // namespace flexstereo
