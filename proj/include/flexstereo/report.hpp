#pragma once

#include <string>

#include "flexstereo/harness.hpp"

// Machine-readable report files for one experiment run, all deterministic
// for a fixed config and seed (timing never enters these files):
//   series.txt   line-delimited truth/estimate time series
//   summary.txt  flat key-value aggregate document (RMSE table layout)
//   boxdata.txt  per-step normalized error column (box/time plots)
//   depth.txt    per-frame depth accuracy/completeness columns
//   prior.txt    the inflated prior the estimator used
// Numbers carry 17 significant digits, so re-ingesting series.txt plus
// depth.txt reproduces summary.txt exactly.

namespace flexstereo {

// Contents of a series file: everything needed to recompute the summary.
struct SeriesData {
  std::string mode;
  uint64_t seed = 0;
  double imu_rate = 100.0;
  double warmup = 5.0;
  WingPrior prior_calibrated;
  std::vector<StepRecord> series;
  std::vector<DepthRecord> depth_series;
};

void emit_report(const RunReport& report, const std::string& out_dir);

SeriesData read_series(const std::string& series_path,
                       const std::string& depth_path = "");

std::string render_summary(const std::string& mode, uint64_t seed,
                           double warmup, const Aggregates& agg);

std::string read_text_file(const std::string& path);

}  // namespace flexstereo
