#include "flexstereo/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flexstereo {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("emit_report: cannot write " + path);
  }
  return out;
}

std::map<std::string, double> parse_kv_fields(std::istringstream& in) {
  std::map<std::string, double> fields;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("report: malformed token '" + token + "'");
    }
    fields[token.substr(0, eq)] = std::stod(token.substr(eq + 1));
  }
  return fields;
}

double need(const std::map<std::string, double>& f, const std::string& key,
            const std::string& context) {
  const auto it = f.find(key);
  if (it == f.end()) {
    throw std::runtime_error("report: missing field '" + key + "' in " +
                             context);
  }
  return it->second;
}

}  // namespace

std::string render_summary(const std::string& mode, uint64_t seed,
                           double warmup, const Aggregates& agg) {
  std::string s;
  s += "# flexstereo summary 1\n";
  s += "mode = " + mode + "\n";
  s += "seed = " + std::to_string(seed) + "\n";
  s += "warmup_s = " + fmt(warmup) + "\n";
  s += "steps_used = " + std::to_string(agg.steps_used) + "\n";
  s += "rot_rmse_deg = " + fmt(agg.rot_rmse_deg.x()) + " " +
       fmt(agg.rot_rmse_deg.y()) + " " + fmt(agg.rot_rmse_deg.z()) + "\n";
  s += "trans_rmse_mm = " + fmt(agg.trans_rmse_mm.x()) + " " +
       fmt(agg.trans_rmse_mm.y()) + " " + fmt(agg.trans_rmse_mm.z()) + "\n";
  s += "normalized_rmse = " + fmt(agg.normalized_rmse) + "\n";
  s += "median_step_normalized = " + fmt(agg.median_step_normalized) + "\n";
  s += "depth_frames = " + std::to_string(agg.depth_frames) + "\n";
  s += "depth_mean_dz_est_m = " + fmt(agg.mean_dz_est) + "\n";
  s += "depth_mean_dz_fixed_m = " + fmt(agg.mean_dz_fixed) + "\n";
  s += "depth_mean_dnum_est = " + fmt(agg.mean_dnum_est) + "\n";
  s += "depth_mean_dnum_fixed = " + fmt(agg.mean_dnum_fixed) + "\n";
  s += "depth_mean_gt_depth_m = " + fmt(agg.mean_gt_depth) + "\n";
  return s;
}

void emit_report(const RunReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  {
    auto out = open_out((dir / "series.txt").string());
    out << "# flexstereo series 1\n";
    out << "# run mode=" << report.mode << " seed=" << report.seed
        << " imu_rate=" << fmt(report.imu_rate)
        << " warmup=" << fmt(report.warmup) << "\n";
    const WingPrior& pc = report.prior_calibrated;
    out << "# normalization qw=" << fmt(pc.q_mu.w())
        << " qx=" << fmt(pc.q_mu.x()) << " qy=" << fmt(pc.q_mu.y())
        << " qz=" << fmt(pc.q_mu.z()) << " pmx=" << fmt(pc.p_mu.x())
        << " pmy=" << fmt(pc.p_mu.y()) << " pmz=" << fmt(pc.p_mu.z())
        << " stx=" << fmt(pc.sigma_theta.x())
        << " sty=" << fmt(pc.sigma_theta.y())
        << " stz=" << fmt(pc.sigma_theta.z())
        << " spx=" << fmt(pc.sigma_p.x()) << " spy=" << fmt(pc.sigma_p.y())
        << " spz=" << fmt(pc.sigma_p.z()) << "\n";
    for (const StepRecord& r : report.series) {
      out << "step t=" << fmt(r.t) << " tqw=" << fmt(r.truth.rotation.w())
          << " tqx=" << fmt(r.truth.rotation.x())
          << " tqy=" << fmt(r.truth.rotation.y())
          << " tqz=" << fmt(r.truth.rotation.z())
          << " tpx=" << fmt(r.truth.translation.x())
          << " tpy=" << fmt(r.truth.translation.y())
          << " tpz=" << fmt(r.truth.translation.z())
          << " eqw=" << fmt(r.estimate.rotation.w())
          << " eqx=" << fmt(r.estimate.rotation.x())
          << " eqy=" << fmt(r.estimate.rotation.y())
          << " eqz=" << fmt(r.estimate.rotation.z())
          << " epx=" << fmt(r.estimate.translation.x())
          << " epy=" << fmt(r.estimate.translation.y())
          << " epz=" << fmt(r.estimate.translation.z()) << "\n";
    }
  }

  {
    auto out = open_out((dir / "summary.txt").string());
    out << render_summary(report.mode, report.seed, report.warmup,
                          report.aggregates);
  }

  {
    auto out = open_out((dir / "boxdata.txt").string());
    out << "# columns: t normalized_error\n";
    Eigen::Matrix<double, 6, 1> sigma;
    sigma << report.prior_calibrated.sigma_theta,
        report.prior_calibrated.sigma_p;
    for (const StepRecord& r : report.series) {
      if (r.t <= report.warmup) {
        continue;
      }
      const Eigen::Matrix<double, 6, 1> dev =
          pose_deviation_vector(r.truth, r.estimate);
      const double s = std::sqrt(dev.cwiseQuotient(sigma).squaredNorm() / 6.0);
      out << fmt(r.t) << " " << fmt(s) << "\n";
    }
  }

  {
    auto out = open_out((dir / "depth.txt").string());
    out << "# columns: t dz_est dz_fixed dnum_est dnum_fixed gt_mean_depth "
           "overlap_est overlap_fixed\n";
    for (const DepthRecord& d : report.depth_series) {
      out << "depth t=" << fmt(d.t) << " dze=" << fmt(d.dz_est)
          << " dzf=" << fmt(d.dz_fixed) << " dne=" << fmt(d.dnum_est)
          << " dnf=" << fmt(d.dnum_fixed) << " gtd=" << fmt(d.gt_mean_depth)
          << " ove=" << d.overlap_est << " ovf=" << d.overlap_fixed << "\n";
    }
  }

  save_prior(report.prior_used, (dir / "prior.txt").string());
}

SeriesData read_series(const std::string& series_path,
                       const std::string& depth_path) {
  std::ifstream in(series_path);
  if (!in) {
    throw std::runtime_error("read_series: cannot read " + series_path);
  }
  SeriesData data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      std::istringstream hin(line);
      std::string hash, tag;
      hin >> hash >> tag;
      if (tag == "run") {
        std::string token;
        while (hin >> token) {
          const auto eq = token.find('=');
          if (eq == std::string::npos) {
            continue;
          }
          const std::string key = token.substr(0, eq);
          const std::string value = token.substr(eq + 1);
          if (key == "mode") {
            data.mode = value;
          } else if (key == "seed") {
            data.seed = std::stoull(value);
          } else if (key == "imu_rate") {
            data.imu_rate = std::stod(value);
          } else if (key == "warmup") {
            data.warmup = std::stod(value);
          }
        }
      } else if (tag == "normalization") {
        const auto f = parse_kv_fields(hin);
        WingPrior& p = data.prior_calibrated;
        p.q_mu = Eigen::Quaterniond(
            need(f, "qw", "normalization"), need(f, "qx", "normalization"),
            need(f, "qy", "normalization"), need(f, "qz", "normalization"));
        p.p_mu = Eigen::Vector3d(need(f, "pmx", "normalization"),
                                 need(f, "pmy", "normalization"),
                                 need(f, "pmz", "normalization"));
        p.sigma_theta = Eigen::Vector3d(need(f, "stx", "normalization"),
                                        need(f, "sty", "normalization"),
                                        need(f, "stz", "normalization"));
        p.sigma_p = Eigen::Vector3d(need(f, "spx", "normalization"),
                                    need(f, "spy", "normalization"),
                                    need(f, "spz", "normalization"));
      }
      continue;
    }
    std::istringstream rin(line);
    std::string tag;
    rin >> tag;
    if (tag != "step") {
      throw std::runtime_error("read_series: unexpected record '" + tag + "'");
    }
    const auto f = parse_kv_fields(rin);
    StepRecord r;
    r.t = need(f, "t", "step");
    r.truth.rotation =
        Eigen::Quaterniond(need(f, "tqw", "step"), need(f, "tqx", "step"),
                           need(f, "tqy", "step"), need(f, "tqz", "step"));
    r.truth.translation =
        Eigen::Vector3d(need(f, "tpx", "step"), need(f, "tpy", "step"),
                        need(f, "tpz", "step"));
    r.estimate.rotation =
        Eigen::Quaterniond(need(f, "eqw", "step"), need(f, "eqx", "step"),
                           need(f, "eqy", "step"), need(f, "eqz", "step"));
    r.estimate.translation =
        Eigen::Vector3d(need(f, "epx", "step"), need(f, "epy", "step"),
                        need(f, "epz", "step"));
    data.series.push_back(r);
  }

  if (!depth_path.empty() && std::filesystem::exists(depth_path)) {
    std::ifstream din(depth_path);
    while (std::getline(din, line)) {
      if (line.empty() || line[0] == '#') {
        continue;
      }
      std::istringstream rin(line);
      std::string tag;
      rin >> tag;
      if (tag != "depth") {
        throw std::runtime_error("read_series: unexpected depth record '" +
                                 tag + "'");
      }
      const auto f = parse_kv_fields(rin);
      DepthRecord d;
      d.t = need(f, "t", "depth");
      d.dz_est = need(f, "dze", "depth");
      d.dz_fixed = need(f, "dzf", "depth");
      d.dnum_est = need(f, "dne", "depth");
      d.dnum_fixed = need(f, "dnf", "depth");
      d.gt_mean_depth = need(f, "gtd", "depth");
      d.overlap_est = static_cast<long>(need(f, "ove", "depth"));
      d.overlap_fixed = static_cast<long>(need(f, "ovf", "depth"));
      data.depth_series.push_back(d);
    }
  }
  return data;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path);
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace flexstereo
