#include "flexstereo/depth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace flexstereo {

RelativePose rig_to_camera(const RelativePose& t_rig) {
  // camera x = -rig y, camera y = -rig z, camera z = rig x
  Eigen::Matrix3d m;
  // clang-format off
  m << 0.0, -1.0,  0.0,
       0.0,  0.0, -1.0,
       1.0,  0.0,  0.0;
  // clang-format on
  RelativePose out;
  out.rotation = Eigen::Quaterniond(
      m * quat_to_rotmat(t_rig.rotation) * m.transpose());
  out.rotation.normalize();
  out.translation = m * t_rig.translation;
  return out;
}

Rectification rectify_pair(const RelativePose& t) {
  const double b = t.translation.norm();
  if (b < 1e-12) {
    throw std::invalid_argument("rectify_pair: zero baseline");
  }
  const Eigen::Vector3d ex = t.translation / b;
  Eigen::Vector3d ey = Eigen::Vector3d::UnitZ().cross(ex);
  const double n = ey.norm();
  if (n < 1e-9) {
    throw std::invalid_argument(
        "rectify_pair: baseline parallel to the optical axis");
  }
  ey /= n;
  const Eigen::Vector3d ez = ex.cross(ey);

  Rectification rect;
  rect.r1.row(0) = ex;
  rect.r1.row(1) = ey;
  rect.r1.row(2) = ez;
  rect.r2 = rect.r1 * quat_to_rotmat(t.rotation);
  rect.baseline = b;
  return rect;
}

namespace {

// Precomputed projection chain shared by epipolar_displacement and
// synth_depth_map. The true and assumed paths run through identical
// arithmetic so that t_assumed == t_true yields exact zeros.
struct DisplacementModel {
  Eigen::Matrix3d back;          // rect1 ray -> cam1
  Eigen::Matrix3d map_true;      // cam1 point -> rect2 (true pose)
  Eigen::Vector3d off_true;
  Eigen::Matrix3d map_assumed;   // cam1 point -> rect2 (assumed pose)
  Eigen::Vector3d off_assumed;
  double baseline;
  const CameraIntrinsics* k;

  DisplacementModel(const RelativePose& t_true, const RelativePose& t_assumed,
                    const CameraIntrinsics& intr)
      : k(&intr) {
    const Rectification rect = rectify_pair(t_assumed);
    baseline = rect.baseline;
    back = rect.r1.transpose();
    const Eigen::Matrix3d c_true = quat_to_rotmat(t_true.rotation);
    const Eigen::Matrix3d c_assumed = quat_to_rotmat(t_assumed.rotation);
    map_true = rect.r2 * c_true.transpose();
    off_true = -(map_true * t_true.translation);
    map_assumed = rect.r2 * c_assumed.transpose();
    off_assumed = -(map_assumed * t_assumed.translation);
  }

  Eigen::Vector3d backproject(double u, double v, double depth) const {
    return back * Eigen::Vector3d(depth * (u - k->cx) / k->f,
                                  depth * (v - k->cy) / k->f, depth);
  }

  // Returns false when the point is behind a camera.
  bool project(double u, double v, double depth, Eigen::Vector2d& px_true,
               Eigen::Vector2d& px_assumed) const {
    const Eigen::Vector3d x = backproject(u, v, depth);
    const Eigen::Vector3d yt = map_true * x + off_true;
    const Eigen::Vector3d ya = map_assumed * x + off_assumed;
    if (yt.z() <= 0.0 || ya.z() <= 0.0) {
      return false;
    }
    px_true = {k->cx + k->f * yt.x() / yt.z(), k->cy + k->f * yt.y() / yt.z()};
    px_assumed = {k->cx + k->f * ya.x() / ya.z(),
                  k->cy + k->f * ya.y() / ya.z()};
    return true;
  }
};

}  // namespace

Eigen::Vector2d epipolar_displacement(const Eigen::Vector2d& pixel,
                                      double depth, const RelativePose& t_true,
                                      const RelativePose& t_assumed,
                                      const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("epipolar_displacement: depth must be > 0");
  }
  const DisplacementModel model(t_true, t_assumed, k);
  Eigen::Vector2d px_true, px_assumed;
  if (!model.project(pixel.x(), pixel.y(), depth, px_true, px_assumed)) {
    throw std::domain_error(
        "epipolar_displacement: point behind a camera");
  }
  return px_true - px_assumed;
}

DepthMap synth_depth_map(const DepthMap& gt, const RelativePose& t_true,
                         const RelativePose& t_assumed,
                         const CameraIntrinsics& k, double v_thresh) {
  if (!(v_thresh > 0.0)) {
    throw std::invalid_argument("synth_depth_map: v_thresh must be > 0");
  }
  const DisplacementModel model(t_true, t_assumed, k);
  const double fb = k.f * model.baseline;

  DepthMap out(gt.width, gt.height);
  Eigen::Vector2d px_true, px_assumed;
  for (int row = 0; row < gt.height; ++row) {
    for (int col = 0; col < gt.width; ++col) {
      if (!gt.valid(row, col)) {
        continue;
      }
      const double z = gt.at(row, col);
      const double u = static_cast<double>(col);
      const double v = static_cast<double>(row);
      if (!model.project(u, v, z, px_true, px_assumed)) {
        continue;
      }
      const double dy = px_true.y() - px_assumed.y();
      if (std::abs(dy) > v_thresh) {
        continue;
      }
      // The matcher finds the correspondence at its true location; outside
      // the image there is nothing to find.
      if (px_true.x() < 0.0 ||
          px_true.x() >= static_cast<double>(gt.width)) {
        continue;
      }
      const double dx = px_true.x() - px_assumed.x();
      const double d_measured = (u - px_assumed.x()) - dx;
      if (d_measured <= 1e-9) {
        continue;
      }
      out.at(row, col) = dx == 0.0 ? gt.at(row, col)
                                   : static_cast<float>(fb / d_measured);
    }
  }
  return out;
}

double depth_from_disparity(double f, double b, double d) {
  if (!(d > 0.0)) {
    throw std::domain_error("depth_from_disparity: disparity must be > 0");
  }
  return f * b / d;
}

double completeness_error(const DepthMap& gt, const DepthMap& estimate) {
  if (gt.width != estimate.width || gt.height != estimate.height) {
    throw std::invalid_argument("completeness_error: dimension mismatch");
  }
  long valid_gt = 0;
  long lost = 0;
  for (int row = 0; row < gt.height; ++row) {
    for (int col = 0; col < gt.width; ++col) {
      if (!gt.valid(row, col)) {
        continue;
      }
      ++valid_gt;
      if (!estimate.valid(row, col)) {
        ++lost;
      }
    }
  }
  if (valid_gt == 0) {
    throw std::runtime_error(
        "completeness_error: ground truth has no valid pixels");
  }
  return static_cast<double>(lost) / static_cast<double>(valid_gt);
}

double accuracy_error(const DepthMap& gt, const DepthMap& estimate) {
  if (gt.width != estimate.width || gt.height != estimate.height) {
    throw std::invalid_argument("accuracy_error: dimension mismatch");
  }
  long overlap = 0;
  double sum_sq = 0.0;
  for (int row = 0; row < gt.height; ++row) {
    for (int col = 0; col < gt.width; ++col) {
      if (!gt.valid(row, col) || !estimate.valid(row, col)) {
        continue;
      }
      const double diff = static_cast<double>(gt.at(row, col)) -
                          static_cast<double>(estimate.at(row, col));
      sum_sq += diff * diff;
      ++overlap;
    }
  }
  if (overlap == 0) {
    throw std::runtime_error("accuracy_error: no jointly valid pixels");
  }
  return std::sqrt(sum_sq / static_cast<double>(overlap));
}

DepthErrorReport depth_error_report(const DepthMap& gt,
                                    const DepthMap& estimate) {
  DepthErrorReport report;
  report.completeness = completeness_error(gt, estimate);
  long overlap = 0;
  for (int row = 0; row < gt.height; ++row) {
    for (int col = 0; col < gt.width; ++col) {
      if (gt.valid(row, col) && estimate.valid(row, col)) {
        ++overlap;
      }
    }
  }
  report.overlap_count = overlap;
  report.accuracy_m = overlap > 0 ? accuracy_error(gt, estimate) : 0.0;
  return report;
}

DepthMap scene_depth_map(const CameraIntrinsics& k, double baseline,
                         const SceneConfig& scene, double phase) {
  DepthMap map(k.width, k.height);
  const double two_pi = 2.0 * M_PI;
  for (int row = 0; row < k.height; ++row) {
    const double vn = static_cast<double>(row) / (k.height - 1);
    const double ramp = scene.ramp_top + (scene.ramp_bottom - scene.ramp_top) * vn;
    for (int col = 0; col < k.width; ++col) {
      const double un = static_cast<double>(col) / (k.width - 1);
      const double wob =
          scene.amp1 * std::sin(two_pi * (1.7 * un + 0.6 * vn) + phase) +
          scene.amp2 *
              std::sin(two_pi * (0.35 * un - 1.3 * vn) + 0.7 * phase + 1.9);
      const double z =
          std::min(scene.far, std::max(scene.near, ramp + wob));
      // Border rule: the true correspondence must land inside image 2.
      const double u2 = static_cast<double>(col) - k.f * baseline / z;
      if (u2 < 0.0 || u2 >= static_cast<double>(k.width)) {
        continue;
      }
      map.at(row, col) = static_cast<float>(z);
    }
  }
  return map;
}

void save_depth_map(const DepthMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_depth_map: cannot write " + path);
  }
  out.write("FSDM", 4);
  const uint32_t w = static_cast<uint32_t>(map.width);
  const uint32_t h = static_cast<uint32_t>(map.height);
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(map.z.data()),
            static_cast<std::streamsize>(map.z.size() * sizeof(float)));
  if (!out) {
    throw std::runtime_error("save_depth_map: write failed for " + path);
  }
}

DepthMap load_depth_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_depth_map: cannot read " + path);
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (std::string(magic, 4) != "FSDM") {
    throw std::runtime_error("load_depth_map: bad magic in " + path);
  }
  uint32_t w = 0;
  uint32_t h = 0;
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(map.z.data()),
          static_cast<std::streamsize>(map.z.size() * sizeof(float)));
  if (!in) {
    throw std::runtime_error("load_depth_map: truncated file " + path);
  }
  return map;
}

std::string depth_map_summary(const DepthMap& map) {
  long valid = 0;
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int row = 0; row < map.height; ++row) {
    for (int col = 0; col < map.width; ++col) {
      if (!map.valid(row, col)) {
        continue;
      }
      const double z = map.at(row, col);
      ++valid;
      sum += z;
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  char line[160];
  if (valid == 0) {
    std::snprintf(line, sizeof(line), "valid=0 mean=nan min=nan max=nan");
  } else {
    std::snprintf(line, sizeof(line), "valid=%ld mean=%.6g min=%.6g max=%.6g",
                  valid, sum / static_cast<double>(valid), lo, hi);
  }
  return line;
}

}  // namespace flexstereo
