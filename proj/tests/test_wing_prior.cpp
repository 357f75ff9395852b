#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <random>

#include "flexstereo/wing_prior.hpp"
#include "oracles.hpp"

using namespace flexstereo;

namespace {

constexpr double kDeg = M_PI / 180.0;

// The nominal transform and spread used throughout: baseline 3 m along -y,
// roll-dominated deviations (the flapping axis), millimeter translations.
WingPrior reference_prior() {
  WingPrior p;
  p.q_mu = small_angle_to_quat(
      Eigen::Vector3d(-0.51 * kDeg, -1.8e-6 * kDeg, -3.3e-4 * kDeg));
  p.p_mu = Eigen::Vector3d(-0.0087e-3, -3.0, 13.4e-3);
  p.sigma_theta = Eigen::Vector3d(1.9, 7.1e-3, 1.3e-2) * kDeg;
  p.sigma_p = Eigen::Vector3d(0.27e-3, 3.0e-3, 50.5e-3);
  return p;
}

RelativePose sample_from(const WingPrior& p, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Vector3d dth = p.sigma_theta.cwiseProduct(
      Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)));
  const Eigen::Vector3d dp = p.sigma_p.cwiseProduct(
      Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)));
  RelativePose out;
  out.rotation = quat_multiply(p.q_mu, small_angle_to_quat(dth));
  out.translation = p.p_mu + dp;
  return out;
}

}  // namespace

TEST_CASE("calibrate_prior rejects degenerate input") {
  std::vector<RelativePose> one(1);
  CHECK_THROWS_AS((void)calibrate_prior(one), std::invalid_argument);
}

TEST_CASE("calibrate_prior on identical samples floors the sigmas") {
  RelativePose pose;
  pose.rotation = small_angle_to_quat({0.1, -0.2, 0.05});
  pose.translation = Eigen::Vector3d(0.0, -3.0, 0.1);
  const std::vector<RelativePose> samples(5, pose);
  const WingPrior prior = calibrate_prior(samples, 1e-6);
  CHECK(quat_angle(prior.q_mu, pose.rotation) < 1e-9);
  CHECK((prior.p_mu - pose.translation).norm() < 1e-12);
  CHECK(prior.sigma_theta.minCoeff() == 1e-6);
  CHECK(prior.sigma_p.maxCoeff() == 1e-6);
}

TEST_CASE("calibrate_prior two-sample symmetric case") {
  const Eigen::Quaterniond mid = small_angle_to_quat({0.0, 0.0, 0.3});
  std::vector<RelativePose> samples(2);
  samples[0].rotation =
      quat_multiply(mid, small_angle_to_quat({1.0 * kDeg, 0.0, 0.0}));
  samples[1].rotation =
      quat_multiply(mid, small_angle_to_quat({-1.0 * kDeg, 0.0, 0.0}));
  samples[0].translation = samples[1].translation = Eigen::Vector3d(0, -3, 0);

  const WingPrior prior = calibrate_prior(samples);
  CHECK(quat_angle(prior.q_mu, mid) < 1e-9);
  // unbiased n=2: sqrt(2) * deviation
  CHECK(prior.sigma_theta.x() ==
        doctest::Approx(std::sqrt(2.0) * kDeg).epsilon(1e-6));
}

TEST_CASE("calibrate_prior recovers the generating distribution") {
  const WingPrior truth = reference_prior();
  std::mt19937_64 rng(101);
  std::vector<RelativePose> samples;
  samples.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    samples.push_back(sample_from(truth, rng));
  }
  const WingPrior fit = calibrate_prior(samples);
  // the mean is only sampling-error accurate: sigma_roll / sqrt(n) ~ 1e-4
  CHECK(quat_angle(fit.q_mu, truth.q_mu) < 5e-4);
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(fit.sigma_theta(a) / truth.sigma_theta(a) - 1.0) < 0.02);
    CHECK(std::abs(fit.sigma_p(a) / truth.sigma_p(a) - 1.0) < 0.02);
  }
}

TEST_CASE("calibrate_prior is order invariant") {
  const WingPrior truth = reference_prior();
  std::mt19937_64 rng(103);
  std::vector<RelativePose> samples;
  for (int i = 0; i < 500; ++i) {
    samples.push_back(sample_from(truth, rng));
  }
  const WingPrior a = calibrate_prior(samples);
  std::shuffle(samples.begin(), samples.end(), rng);
  const WingPrior b = calibrate_prior(samples);
  CHECK(quat_angle(a.q_mu, b.q_mu) < 1e-12);
  CHECK((a.p_mu - b.p_mu).norm() < 1e-12);
  CHECK((a.sigma_theta - b.sigma_theta).norm() < 1e-12);
  CHECK((a.sigma_p - b.sigma_p).norm() < 1e-12);
}

TEST_CASE("deviation basics and round trip") {
  const WingPrior prior = reference_prior();
  SUBCASE("prior mean maps to zero") {
    const PoseDeviation d = deviation(prior, prior.mean());
    CHECK(d.theta.norm() < 1e-12);
    CHECK(d.p.norm() < 1e-12);
  }
  SUBCASE("pure translation offset") {
    RelativePose pose = prior.mean();
    pose.translation += Eigen::Vector3d(0.0, 0.0, 0.05);
    const PoseDeviation d = deviation(prior, pose);
    CHECK((d.p - Eigen::Vector3d(0.0, 0.0, 0.05)).norm() < 1e-12);
    CHECK(d.theta.norm() < 1e-12);
  }
  SUBCASE("rotation round trip") {
    std::mt19937_64 rng(107);
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector3d dth = test::random_vec(rng, -0.3, 0.3);
      RelativePose pose;
      pose.rotation = quat_multiply(prior.q_mu, small_angle_to_quat(dth));
      pose.translation = prior.p_mu;
      const PoseDeviation d = deviation(prior, pose);
      CHECK((d.theta - dth).norm() < 1e-9);
    }
  }
}

namespace {

VisualMeasurement measurement_with_deviation(const WingPrior& prior,
                                             const Eigen::Vector3d& dth,
                                             const Eigen::Vector3d& dp,
                                             const PoseCovariance& cov) {
  VisualMeasurement m;
  m.q = quat_multiply(prior.q_mu, small_angle_to_quat(dth));
  m.dir = (prior.p_mu + dp).normalized();
  m.cov = cov;
  return m;
}

// Measured translation deviation after the scale-by-|p_mu| reconstruction.
Eigen::Vector3d reconstructed_dp(const WingPrior& prior,
                                 const VisualMeasurement& m) {
  return m.dir * prior.p_mu.norm() - prior.p_mu;
}

}  // namespace

TEST_CASE("fuse_with_prior symmetric covariance halves the deviation") {
  const WingPrior prior = reference_prior();
  const PoseCovariance sigma_c = prior.covariance();
  const Eigen::Vector3d dth(0.02, 1e-4, -2e-4);
  const Eigen::Vector3d dp(1e-4, 2e-3, 0.03);
  const VisualMeasurement m =
      measurement_with_deviation(prior, dth, dp, sigma_c);

  const FusedPoseMeasurement fused = fuse_with_prior(prior, m);
  const PoseDeviation out = deviation(prior, RelativePose{fused.q, fused.p});
  CHECK((out.theta - 0.5 * dth).norm() < 1e-9);
  CHECK((out.p - 0.5 * reconstructed_dp(prior, m)).norm() < 1e-9);
  CHECK((fused.cov - 0.5 * sigma_c).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("fuse_with_prior uninformative measurement returns the prior") {
  const WingPrior prior = reference_prior();
  const VisualMeasurement m = measurement_with_deviation(
      prior, {0.05, 0.001, -0.002}, {0.001, 0.005, 0.08},
      1e12 * PoseCovariance::Identity());
  const FusedPoseMeasurement fused = fuse_with_prior(prior, m);
  CHECK(quat_angle(fused.q, prior.q_mu) < 1e-9);
  CHECK((fused.p - prior.p_mu).norm() < 1e-9);
  CHECK((fused.cov - prior.covariance()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fuse_with_prior matches the Gaussian product oracle") {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> var(1e-6, 1e-2);
  for (int trial = 0; trial < 200; ++trial) {
    WingPrior prior = reference_prior();
    for (int a = 0; a < 3; ++a) {
      prior.sigma_theta(a) = std::sqrt(var(rng));
      prior.sigma_p(a) = std::sqrt(var(rng));
    }
    PoseCovariance sigma_v = PoseCovariance::Zero();
    for (int i = 0; i < 6; ++i) {
      sigma_v(i, i) = var(rng);
    }
    const Eigen::Vector3d dth = test::random_vec(rng, -0.05, 0.05);
    const Eigen::Vector3d dp = test::random_vec(rng, -0.05, 0.05);
    const VisualMeasurement m =
        measurement_with_deviation(prior, dth, dp, sigma_v);

    const FusedPoseMeasurement fused = fuse_with_prior(prior, m);
    const PoseDeviation out = deviation(prior, RelativePose{fused.q, fused.p});

    // Independent route: information-form product of the two Gaussians.
    Eigen::Matrix<double, 6, 1> dev_v;
    dev_v << dth, reconstructed_dp(prior, m);
    const PoseCovariance sigma_c = prior.covariance();
    const PoseCovariance info = sigma_c.inverse() + sigma_v.inverse();
    const PoseCovariance post_cov = info.inverse();
    const Eigen::Matrix<double, 6, 1> post_mean =
        post_cov * sigma_v.inverse() * dev_v;

    Eigen::Matrix<double, 6, 1> fused_dev;
    fused_dev << out.theta, out.p;
    CHECK((fused_dev - post_mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((fused.cov - post_cov).cwiseAbs().maxCoeff() < 1e-8);

    // Shrinkage and per-axis containment for diagonal covariances.
    for (int i = 0; i < 6; ++i) {
      CHECK(fused.cov(i, i) <= sigma_c(i, i) + 1e-15);
      CHECK(fused.cov(i, i) <= sigma_v(i, i) + 1e-15);
      if (std::abs(dev_v(i)) > 1e-12) {
        const double ratio = fused_dev(i) / dev_v(i);
        CHECK(ratio >= -1e-9);
        CHECK(ratio <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("fuse_with_prior rejects a singular joint covariance") {
  WingPrior degenerate = reference_prior();
  degenerate.sigma_theta.setConstant(0.0);  // bypasses the calibration floor
  degenerate.sigma_p.setConstant(0.0);
  VisualMeasurement m;
  m.q = degenerate.q_mu;
  m.dir = degenerate.p_mu.normalized();
  m.cov.setZero();
  CHECK_THROWS_AS((void)fuse_with_prior(degenerate, m), std::runtime_error);
}

TEST_CASE("gate accepts and rejects per the per-axis test") {
  const WingPrior prior = reference_prior();
  const GateConfig cfg{2.0};
  PoseCovariance sigma_v = PoseCovariance::Zero();
  sigma_v.diagonal().head<3>().setConstant(std::pow(1.9 * kDeg, 2));
  sigma_v.diagonal().tail<3>().setConstant(std::pow(0.05, 2));

  SUBCASE("zero deviation is accepted and equals the fusion result") {
    const VisualMeasurement m = measurement_with_deviation(
        prior, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), sigma_v);
    const FusedPoseMeasurement gated = gate(prior, m, cfg);
    const FusedPoseMeasurement fused = fuse_with_prior(prior, m);
    CHECK(quat_angle(gated.q, fused.q) < 1e-12);
    CHECK((gated.p - fused.p).norm() < 1e-12);
  }
  SUBCASE("4 degrees of roll against sigma 1.9 degrees trips the gate") {
    const VisualMeasurement m = measurement_with_deviation(
        prior, {4.0 * kDeg, 0.0, 0.0}, Eigen::Vector3d::Zero(), sigma_v);
    const FusedPoseMeasurement gated = gate(prior, m, cfg);
    CHECK(quat_angle(gated.q, prior.q_mu) < 1e-12);
    CHECK((gated.p - prior.p_mu).norm() < 1e-12);
    CHECK((gated.cov - prior.covariance()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("a deviation exactly at k sigma is accepted") {
    const VisualMeasurement m = measurement_with_deviation(
        prior, {2.0 * 1.9 * kDeg, 0.0, 0.0}, Eigen::Vector3d::Zero(),
        sigma_v);
    const FusedPoseMeasurement gated = gate(prior, m, cfg);
    // Not the artificial prior measurement: the fused pose moved off q_mu.
    CHECK(quat_angle(gated.q, prior.q_mu) > 1e-4);
  }
}

TEST_CASE("gate always returns a usable measurement") {
  const WingPrior prior = reference_prior();
  const GateConfig cfg{2.0};
  std::mt19937_64 rng(113);
  PoseCovariance sigma_v = PoseCovariance::Zero();
  sigma_v.diagonal().head<3>().setConstant(std::pow(2.0 * kDeg, 2));
  sigma_v.diagonal().tail<3>().setConstant(std::pow(0.06, 2));
  for (int i = 0; i < 200; ++i) {
    const VisualMeasurement m = measurement_with_deviation(
        prior, test::random_vec(rng, -0.5, 0.5),
        test::random_vec(rng, -0.5, 0.5), sigma_v);
    const FusedPoseMeasurement out = gate(prior, m, cfg);
    CHECK(std::abs(out.q.norm() - 1.0) < 1e-9);
    CHECK(out.p.allFinite());
    Eigen::SelfAdjointEigenSolver<PoseCovariance> eig(out.cov);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("prior serialization round trip") {
  const WingPrior prior = reference_prior();
  const std::string path =
      (std::filesystem::temp_directory_path() / "flexstereo_prior_test.txt")
          .string();
  save_prior(prior, path);
  const WingPrior back = load_prior(path);
  CHECK(quat_angle(prior.q_mu, back.q_mu) < 1e-15);
  CHECK((prior.p_mu - back.p_mu).norm() == 0.0);
  CHECK((prior.sigma_theta - back.sigma_theta).norm() == 0.0);
  CHECK((prior.sigma_p - back.sigma_p).norm() == 0.0);
  std::filesystem::remove(path);

  CHECK_THROWS_AS((void)load_prior("/nonexistent/prior.txt"),
                  std::runtime_error);
}

TEST_CASE("inflated prior scales variances") {
  const WingPrior prior = reference_prior();
  const WingPrior big = prior.inflated(1.10);
  CHECK(big.sigma_theta.x() ==
        doctest::Approx(prior.sigma_theta.x() * std::sqrt(1.10)));
  const PoseCovariance ratio =
      big.covariance().cwiseQuotient(prior.covariance());
  for (int i = 0; i < 6; ++i) {
    CHECK(ratio(i, i) == doctest::Approx(1.10).epsilon(1e-12));
  }
}
