#include "flexstereo/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flexstereo {

namespace {

void append_kv(std::string& line, const char* key, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), " %s=%.17g", key, v);
  line += buf;
}

void append_vec3(std::string& line, const char* prefix,
                 const Eigen::Vector3d& v) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), " %sx=%.17g %sy=%.17g %sz=%.17g", prefix,
                v.x(), prefix, v.y(), prefix, v.z());
  line += buf;
}

void append_quat(std::string& line, const char* prefix,
                 const Eigen::Quaterniond& q) {
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                " %sw=%.17g %sx=%.17g %sy=%.17g %sz=%.17g", prefix, q.w(),
                prefix, q.x(), prefix, q.y(), prefix, q.z());
  line += buf;
}

// key=value tokens of one record line
std::map<std::string, double> parse_fields(const std::string& line,
                                           std::string* tag) {
  std::istringstream in(line);
  in >> *tag;
  std::map<std::string, double> fields;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("stream: malformed token '" + token + "'");
    }
    fields[token.substr(0, eq)] = std::stod(token.substr(eq + 1));
  }
  return fields;
}

double need(const std::map<std::string, double>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) {
    throw std::runtime_error("stream: missing field '" + key + "'");
  }
  return it->second;
}

Eigen::Vector3d need_vec3(const std::map<std::string, double>& f,
                          const std::string& prefix) {
  return {need(f, prefix + "x"), need(f, prefix + "y"), need(f, prefix + "z")};
}

Eigen::Quaterniond need_quat(const std::map<std::string, double>& f,
                             const std::string& prefix) {
  return {need(f, prefix + "w"), need(f, prefix + "x"), need(f, prefix + "y"),
          need(f, prefix + "z")};
}

}  // namespace

void write_stream(const SimStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_stream: cannot write " + path);
  }
  out << "# flexstereo stream 1\n";
  std::string header = "# params";
  append_kv(header, "imu_rate", stream.imu_rate);
  append_kv(header, "vision_rate", stream.vision_rate);
  append_kv(header, "gyro_var", stream.gyro_var);
  append_kv(header, "accel_var", stream.accel_var);
  append_kv(header, "multiplier", stream.multiplier);
  out << header << "\n";

  for (const TruthRecord& r : stream.truth) {
    std::string line = "truth";
    append_kv(line, "t", r.t);
    append_quat(line, "q", r.t_true.rotation);
    append_vec3(line, "p", r.t_true.translation);
    append_kv(line, "lroll", r.left.roll);
    append_kv(line, "lrollrate", r.left.roll_rate);
    append_kv(line, "lpitch", r.left.pitch);
    append_kv(line, "lpitchrate", r.left.pitch_rate);
    append_kv(line, "rroll", r.right.roll);
    append_kv(line, "rrollrate", r.right.roll_rate);
    append_kv(line, "rpitch", r.right.pitch);
    append_kv(line, "rpitchrate", r.right.pitch_rate);
    out << line << "\n";
  }
  for (const ImuPair& m : stream.imu) {
    std::string line = "imu";
    append_kv(line, "t", m.t);
    append_vec3(line, "w1", m.omega1);
    append_vec3(line, "w2", m.omega2);
    append_vec3(line, "a1", m.accel1);
    append_vec3(line, "a2", m.accel2);
    out << line << "\n";
  }
  for (const VisualMeasurement& m : stream.vision) {
    std::string line = "vision";
    append_kv(line, "t", m.t);
    append_quat(line, "q", m.q);
    append_vec3(line, "dir", m.dir);
    for (int i = 0; i < 6; ++i) {
      char key[8];
      std::snprintf(key, sizeof(key), "c%d", i);
      append_kv(line, key, m.cov(i, i));
    }
    out << line << "\n";
  }
  if (!out) {
    throw std::runtime_error("write_stream: write failed for " + path);
  }
}

SimStream read_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_stream: cannot read " + path);
  }
  SimStream stream;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      if (line.rfind("# params", 0) == 0) {
        std::string tag;
        const auto f = parse_fields(line.substr(2), &tag);
        stream.imu_rate = need(f, "imu_rate");
        stream.vision_rate = need(f, "vision_rate");
        stream.gyro_var = need(f, "gyro_var");
        stream.accel_var = need(f, "accel_var");
        stream.multiplier = need(f, "multiplier");
      }
      continue;
    }
    std::string tag;
    const auto f = parse_fields(line, &tag);
    if (tag == "truth") {
      TruthRecord r;
      r.t = need(f, "t");
      r.t_true.rotation = need_quat(f, "q");
      r.t_true.translation = need_vec3(f, "p");
      r.left = {need(f, "lroll"), need(f, "lrollrate"), need(f, "lpitch"),
                need(f, "lpitchrate")};
      r.right = {need(f, "rroll"), need(f, "rrollrate"), need(f, "rpitch"),
                 need(f, "rpitchrate")};
      stream.truth.push_back(r);
    } else if (tag == "imu") {
      ImuPair m;
      m.t = need(f, "t");
      m.omega1 = need_vec3(f, "w1");
      m.omega2 = need_vec3(f, "w2");
      m.accel1 = need_vec3(f, "a1");
      m.accel2 = need_vec3(f, "a2");
      m.variance.segment<6>(0).setConstant(stream.gyro_var *
                                           stream.multiplier);
      m.variance.segment<6>(6).setConstant(stream.accel_var *
                                           stream.multiplier);
      stream.imu.push_back(m);
    } else if (tag == "vision") {
      VisualMeasurement m;
      m.t = need(f, "t");
      m.q = need_quat(f, "q");
      m.dir = need_vec3(f, "dir");
      m.cov.setZero();
      for (int i = 0; i < 6; ++i) {
        char key[8];
        std::snprintf(key, sizeof(key), "c%d", i);
        m.cov(i, i) = need(f, key);
      }
      stream.vision.push_back(m);
    } else {
      throw std::runtime_error("read_stream: unknown record '" + tag + "'");
    }
  }
  return stream;
}

}  // namespace flexstereo
