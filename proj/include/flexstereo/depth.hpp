#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "flexstereo/geometry.hpp"

// Analytic stand-in for the stereo matching stage. Instead of matching
// pixels, the model computes where a ground-truth scene point lands in the
// second rectified image under the true relative pose versus where the
// matcher expects it under the assumed pose. Vertical displacement beyond a
// threshold kills the match (correspondence search runs along rows);
// horizontal displacement corrupts the disparity and with it the depth
// z = f * b / d.
//
// Depth code uses the standard camera frame: x right, y down, z along the
// optical axis. rig_to_camera() converts poses from the rig convention
// (x forward, y left, z up) used everywhere else.

namespace flexstereo {

struct CameraIntrinsics {
  double f = 600.0;  // px
  int width = 720;
  int height = 480;
  double cx = 359.5;  // px
  double cy = 239.5;  // px
};

// Row-major depth grid in meters; NaN marks invalid pixels.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> z;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h),
        z(static_cast<size_t>(w) * static_cast<size_t>(h),
          std::numeric_limits<float>::quiet_NaN()) {}

  float& at(int row, int col) {
    return z[static_cast<size_t>(row) * width + col];
  }
  float at(int row, int col) const {
    return z[static_cast<size_t>(row) * width + col];
  }
  bool valid(int row, int col) const { return std::isfinite(at(row, col)); }
};

struct DepthErrorReport {
  double completeness = 0.0;  // fraction of additionally invalid pixels
  double accuracy_m = 0.0;    // RMS depth error over jointly valid pixels
  long overlap_count = 0;     // jointly valid pixels
};

// Fixed axis permutation between the rig frame and the camera frame.
RelativePose rig_to_camera(const RelativePose& t_rig);

struct Rectification {
  Eigen::Matrix3d r1 = Eigen::Matrix3d::Identity();  // cam1 -> rectified
  Eigen::Matrix3d r2 = Eigen::Matrix3d::Identity();  // cam2 -> rectified
  double baseline = 0.0;                             // m
};

// Rotates both cameras so the epipolar lines are horizontal and the
// translation becomes (b, 0, 0). Throws for a degenerate (zero or
// optical-axis aligned) baseline.
Rectification rectify_pair(const RelativePose& t);

// Where a pixel of the assumed-rectified first image, back-projected at the
// given depth, lands in the assumed-rectified second image under the true
// pose minus where it lands under the assumed pose: (dx, dy) in pixels.
// Throws when the point falls behind either camera.
Eigen::Vector2d epipolar_displacement(const Eigen::Vector2d& pixel,
                                      double depth, const RelativePose& t_true,
                                      const RelativePose& t_assumed,
                                      const CameraIntrinsics& k);

// Depth map the block matcher would produce when it assumes t_assumed while
// reality is t_true: per ground-truth-valid pixel the match is dropped when
// |dy| exceeds v_thresh, otherwise the disparity is shifted by the
// horizontal displacement. Zero displacement leaves the sample untouched.
DepthMap synth_depth_map(const DepthMap& gt, const RelativePose& t_true,
                         const RelativePose& t_assumed,
                         const CameraIntrinsics& k, double v_thresh = 1.0);

// z = f * b / d; throws for d <= 0.
double depth_from_disparity(double f, double b, double d);

// Fraction of pixels valid in `gt` but invalid in `estimate`; pixels valid
// only in the estimate are ignored. Throws when `gt` has no valid pixels.
double completeness_error(const DepthMap& gt, const DepthMap& estimate);

// RMS depth error over jointly valid pixels. Throws when the overlap is
// empty.
double accuracy_error(const DepthMap& gt, const DepthMap& estimate);

DepthErrorReport depth_error_report(const DepthMap& gt,
                                    const DepthMap& estimate);

// Procedural ground-truth scene: a smooth undulating depth field over the
// rectified image grid, clamped to [near, far]. Pixels whose true
// correspondence would fall outside the second image are invalid.
struct SceneConfig {
  double near = 20.0;         // m
  double far = 300.0;         // m
  double ramp_top = 205.0;    // m, depth at the top image row
  double ramp_bottom = 42.0;  // m, depth at the bottom image row
  double amp1 = 55.0;         // m
  double amp2 = 25.0;         // m
  double scroll = 0.37;       // phase advance per evaluation frame
};

DepthMap scene_depth_map(const CameraIntrinsics& k, double baseline,
                         const SceneConfig& scene, double phase);

// Binary grid format: "FSDM", uint32 width, uint32 height, then row-major
// float32 depths with NaN marking invalid pixels (host endianness).
void save_depth_map(const DepthMap& map, const std::string& path);
DepthMap load_depth_map(const std::string& path);

// One-line text summary (valid count, mean/min/max valid depth).
std::string depth_map_summary(const DepthMap& map);

}  // namespace flexstereo
