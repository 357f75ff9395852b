#include "flexstereo/wing_prior.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace flexstereo {

PoseCovariance WingPrior::covariance() const {
  PoseCovariance c = PoseCovariance::Zero();
  c.diagonal().head<3>() = sigma_theta.cwiseAbs2();
  c.diagonal().tail<3>() = sigma_p.cwiseAbs2();
  return c;
}

WingPrior WingPrior::inflated(double factor) const {
  WingPrior out = *this;
  out.sigma_theta *= std::sqrt(factor);
  out.sigma_p *= std::sqrt(factor);
  return out;
}

WingPrior calibrate_prior(std::span<const RelativePose> samples,
                          double sigma_floor) {
  if (samples.size() < 2) {
    throw std::invalid_argument("calibrate_prior: need at least two samples");
  }
  const auto n = static_cast<double>(samples.size());

  WingPrior prior;
  prior.q_mu = samples[0].rotation.normalized();
  // Re-linearize the tangent-space mean about the current estimate until the
  // mean deviation vanishes.
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Vector3d mean_dev = Eigen::Vector3d::Zero();
    for (const RelativePose& s : samples) {
      mean_dev += quat_to_small_angle(prior.q_mu.conjugate() * s.rotation);
    }
    mean_dev /= n;
    prior.q_mu = quat_multiply(prior.q_mu, small_angle_to_quat(mean_dev));
    if (mean_dev.norm() < 1e-10) {
      break;
    }
  }

  prior.p_mu.setZero();
  for (const RelativePose& s : samples) {
    prior.p_mu += s.translation;
  }
  prior.p_mu /= n;

  Eigen::Vector3d var_theta = Eigen::Vector3d::Zero();
  Eigen::Vector3d var_p = Eigen::Vector3d::Zero();
  for (const RelativePose& s : samples) {
    const Eigen::Vector3d dth =
        quat_to_small_angle(prior.q_mu.conjugate() * s.rotation);
    const Eigen::Vector3d dp = s.translation - prior.p_mu;
    var_theta += dth.cwiseAbs2();
    var_p += dp.cwiseAbs2();
  }
  var_theta /= (n - 1.0);
  var_p /= (n - 1.0);
  prior.sigma_theta = var_theta.cwiseSqrt().cwiseMax(sigma_floor);
  prior.sigma_p = var_p.cwiseSqrt().cwiseMax(sigma_floor);
  return prior;
}

PoseDeviation deviation(const WingPrior& prior, const RelativePose& pose) {
  PoseDeviation d;
  d.theta = quat_to_small_angle(prior.q_mu.conjugate() * pose.rotation);
  d.p = pose.translation - prior.p_mu;
  return d;
}

namespace {

PoseDeviation visual_deviation(const WingPrior& prior,
                               const VisualMeasurement& m) {
  RelativePose metric;
  metric.rotation = m.q;
  metric.translation = m.dir * prior.p_mu.norm();
  return deviation(prior, metric);
}

}  // namespace

FusedPoseMeasurement fuse_with_prior(const WingPrior& prior,
                                     const VisualMeasurement& m) {
  const PoseDeviation dev = visual_deviation(prior, m);
  Eigen::Matrix<double, 6, 1> dev_v;
  dev_v << dev.theta, dev.p;

  const PoseCovariance sigma_c = prior.covariance();
  const PoseCovariance sigma_v = 0.5 * (m.cov + m.cov.transpose());
  const Eigen::LLT<PoseCovariance> llt(sigma_c + sigma_v);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("fuse_with_prior: Sigma_c + Sigma_v is singular");
  }
  // gain = Sigma_c (Sigma_c + Sigma_v)^-1
  const PoseCovariance gain = llt.solve(sigma_c).transpose();
  const Eigen::Matrix<double, 6, 1> dev_f = gain * dev_v;
  const PoseCovariance sigma_f = sigma_c - gain * sigma_c;

  FusedPoseMeasurement out;
  out.q = quat_multiply(prior.q_mu, small_angle_to_quat(dev_f.head<3>()));
  out.p = prior.p_mu + dev_f.tail<3>();
  out.cov = 0.5 * (sigma_f + sigma_f.transpose());
  return out;
}

FusedPoseMeasurement gate(const WingPrior& prior, const VisualMeasurement& m,
                          const GateConfig& cfg) {
  const PoseDeviation dev = visual_deviation(prior, m);
  Eigen::Matrix<double, 6, 1> dev_v;
  dev_v << dev.theta, dev.p;
  // Per-axis variance-ratio test against the diagonal of Sigma_v.
  const Eigen::Matrix<double, 6, 1> ratio =
      dev_v.cwiseAbs2().cwiseQuotient(m.cov.diagonal());
  if (ratio.maxCoeff() > cfg.k * cfg.k) {
    FusedPoseMeasurement artificial;
    artificial.q = prior.q_mu;
    artificial.p = prior.p_mu;
    artificial.cov = prior.covariance();
    return artificial;
  }
  return fuse_with_prior(prior, m);
}

void save_prior(const WingPrior& prior, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_prior: cannot write " + path);
  }
  char line[256];
  auto put3 = [&](const char* key, const Eigen::Vector3d& v) {
    std::snprintf(line, sizeof(line), "%s = %.17g %.17g %.17g\n", key, v.x(),
                  v.y(), v.z());
    out << line;
  };
  out << "# flexstereo prior 1\n";
  std::snprintf(line, sizeof(line), "q_mu = %.17g %.17g %.17g %.17g\n",
                prior.q_mu.w(), prior.q_mu.x(), prior.q_mu.y(),
                prior.q_mu.z());
  out << line;
  put3("p_mu", prior.p_mu);
  put3("sigma_theta", prior.sigma_theta);
  put3("sigma_p", prior.sigma_p);
}

WingPrior load_prior(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_prior: cannot read " + path);
  }
  std::map<std::string, std::vector<double>> fields;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("load_prior: malformed line: " + line);
    }
    std::istringstream key_in(line.substr(0, eq));
    std::string key;
    key_in >> key;
    std::istringstream val_in(line.substr(eq + 1));
    std::vector<double> vals;
    double v = 0.0;
    while (val_in >> v) {
      vals.push_back(v);
    }
    fields[key] = vals;
  }
  auto need = [&](const std::string& key, size_t count) {
    const auto it = fields.find(key);
    if (it == fields.end() || it->second.size() != count) {
      throw std::runtime_error("load_prior: missing or malformed field " +
                               key);
    }
    return it->second;
  };
  const auto q = need("q_mu", 4);
  const auto p = need("p_mu", 3);
  const auto st = need("sigma_theta", 3);
  const auto sp = need("sigma_p", 3);

  WingPrior prior;
  prior.q_mu = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
  prior.p_mu = Eigen::Vector3d(p[0], p[1], p[2]);
  prior.sigma_theta = Eigen::Vector3d(st[0], st[1], st[2]);
  prior.sigma_p = Eigen::Vector3d(sp[0], sp[1], sp[2]);
  if ((prior.sigma_theta.array() <= 0).any() ||
      (prior.sigma_p.array() <= 0).any()) {
    throw std::runtime_error("load_prior: sigmas must be positive");
  }
  return prior;
}

}  // namespace flexstereo
