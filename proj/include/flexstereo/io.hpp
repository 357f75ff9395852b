#pragma once

#include <string>
#include <vector>

#include "flexstereo/sim.hpp"

// Line-oriented text dump of a simulation run: one self-describing
// key=value record per line ("truth ...", "imu ...", "vision ..."), header
// comments carrying the stream parameters. Numbers are printed with 17
// significant digits so a written stream re-ingests bit-exactly.

namespace flexstereo {

struct TruthRecord {
  double t = 0.0;
  RelativePose t_true;
  WingJointState left, right;
};

struct SimStream {
  double imu_rate = 100.0;
  double vision_rate = 10.0;
  double gyro_var = 0.0;
  double accel_var = 0.0;
  double multiplier = 1.0;
  std::vector<TruthRecord> truth;
  std::vector<ImuPair> imu;
  std::vector<VisualMeasurement> vision;
};

void write_stream(const SimStream& stream, const std::string& path);
SimStream read_stream(const std::string& path);

}  // namespace flexstereo
