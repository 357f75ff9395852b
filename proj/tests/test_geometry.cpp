#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "flexstereo/geometry.hpp"
#include "oracles.hpp"

using namespace flexstereo;

namespace {

// Hand-rolled Hamilton product, the oracle for quat_multiply.
Eigen::Matrix3d rotmat_reference(const Eigen::Quaterniond& q) {
  return q.toRotationMatrix();
}

Eigen::Vector3d sandwich(const Eigen::Quaterniond& q,
                         const Eigen::Vector3d& v) {
  const Eigen::Quaterniond pure(0.0, v.x(), v.y(), v.z());
  const Eigen::Quaterniond out = q * pure * q.conjugate();
  return out.vec();
}

}  // namespace

TEST_CASE("quat_multiply identity and inverse") {
  std::mt19937_64 rng(7);
  const Eigen::Quaterniond q = test::random_quat(rng);
  const Eigen::Quaterniond id(1.0, 0.0, 0.0, 0.0);

  const Eigen::Quaterniond left = quat_multiply(id, q);
  CHECK(quat_angle(left, q) == doctest::Approx(0.0).epsilon(1e-12));

  const Eigen::Quaterniond prod = quat_multiply(q, q.conjugate());
  CHECK(quat_angle(prod, id) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("quat_multiply matches rotation-matrix product") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond a = test::random_quat(rng);
    const Eigen::Quaterniond b = test::random_quat(rng);
    const Eigen::Matrix3d lhs = quat_to_rotmat(quat_multiply(a, b));
    const Eigen::Matrix3d rhs = rotmat_reference(a) * rotmat_reference(b);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("quat_multiply associative") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond a = test::random_quat(rng);
    const Eigen::Quaterniond b = test::random_quat(rng);
    const Eigen::Quaterniond c = test::random_quat(rng);
    const Eigen::Quaterniond lhs = quat_multiply(quat_multiply(a, b), c);
    const Eigen::Quaterniond rhs = quat_multiply(a, quat_multiply(b, c));
    CHECK(quat_angle(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("quat_to_rotmat basic cases") {
  const Eigen::Quaterniond id(1.0, 0.0, 0.0, 0.0);
  CHECK((quat_to_rotmat(id) - Eigen::Matrix3d::Identity()).norm() < 1e-15);

  // 90 degrees about x maps y to z
  const Eigen::Quaterniond rx =
      small_angle_to_quat(Eigen::Vector3d(M_PI / 2.0, 0.0, 0.0));
  const Eigen::Vector3d mapped = quat_to_rotmat(rx) * Eigen::Vector3d::UnitY();
  CHECK((mapped - Eigen::Vector3d::UnitZ()).norm() < 1e-12);
}

TEST_CASE("quat_to_rotmat orthonormality and sandwich oracle") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Quaterniond q = test::random_quat(rng);
    const Eigen::Matrix3d r = quat_to_rotmat(q);
    CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-13);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector3d v = test::random_vec(rng, -2.0, 2.0);
      CHECK((r * v - sandwich(q, v)).norm() < 1e-12);
    }
  }
}

TEST_CASE("skew basics and cross-product oracle") {
  CHECK(skew(Eigen::Vector3d::Zero()).norm() == 0.0);
  const Eigen::Vector3d ez =
      skew(Eigen::Vector3d::UnitX()) * Eigen::Vector3d::UnitY();
  CHECK((ez - Eigen::Vector3d::UnitZ()).norm() == 0.0);

  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d v = test::random_vec(rng, -5.0, 5.0);
    const Eigen::Vector3d u = test::random_vec(rng, -5.0, 5.0);
    const Eigen::Vector3d cross(v.y() * u.z() - v.z() * u.y(),
                                v.z() * u.x() - v.x() * u.z(),
                                v.x() * u.y() - v.y() * u.x());
    CHECK((skew(v) * u - cross).norm() < 1e-13);
    CHECK((skew(v) + skew(v).transpose()).norm() == 0.0);
    CHECK((skew(v) * v).norm() < 1e-14);
  }
}

TEST_CASE("small_angle_to_quat exact and first order") {
  const Eigen::Quaterniond id = small_angle_to_quat(Eigen::Vector3d::Zero());
  CHECK(id.w() == 1.0);
  CHECK(id.vec().norm() == 0.0);

  const Eigen::Quaterniond roll90 =
      small_angle_to_quat(Eigen::Vector3d(M_PI / 2.0, 0.0, 0.0));
  CHECK(roll90.w() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(roll90.x() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  // Taylor oracle: first order [1, theta/2] for small norms
  const Eigen::Vector3d tiny(6e-5, -8e-5, 3e-5);
  const Eigen::Quaterniond q = small_angle_to_quat(tiny);
  CHECK(std::abs(q.w() - 1.0) < 1e-8);
  CHECK((q.vec() - 0.5 * tiny).norm() < 1e-9);
}

TEST_CASE("quat_to_small_angle round trip and double cover") {
  CHECK(quat_to_small_angle(Eigen::Quaterniond(1.0, 0.0, 0.0, 0.0)).norm() ==
        0.0);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mag(0.0, 0.5);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d v = test::random_vec(rng, -1.0, 1.0);
    v = v.normalized() * mag(rng);
    const Eigen::Vector3d back = quat_to_small_angle(small_angle_to_quat(v));
    CHECK((back - v).norm() < 1e-9);
  }

  const Eigen::Quaterniond q = test::random_quat(rng);
  const Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK((quat_to_small_angle(q) - quat_to_small_angle(neg)).norm() == 0.0);
}

TEST_CASE("exp/log round trip up to the domain edge") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> mag(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d v = test::random_vec(rng, -1.0, 1.0);
    v = v.normalized() * mag(rng);
    const Eigen::Vector3d back = quat_to_small_angle(small_angle_to_quat(v));
    CHECK((back - v).norm() < 1e-9);
  }
}

TEST_CASE("quat_to_small_angle rejects angles at pi") {
  const Eigen::Quaterniond half_turn(0.0, 1.0, 0.0, 0.0);
  CHECK_THROWS_AS((void)quat_to_small_angle(half_turn), std::domain_error);
}

TEST_CASE("relative pose compose and inverse") {
  std::mt19937_64 rng(31);
  const RelativePose a{test::random_quat(rng), test::random_vec(rng, -2, 2)};
  const RelativePose b{test::random_quat(rng), test::random_vec(rng, -2, 2)};

  const RelativePose ab = compose(a, b);
  // Point mapped through b then a equals point mapped through ab.
  const Eigen::Vector3d y = test::random_vec(rng, -5, 5);
  const Eigen::Vector3d via_two =
      a.rotation * (b.rotation * y + b.translation) + a.translation;
  const Eigen::Vector3d via_one = ab.rotation * y + ab.translation;
  CHECK((via_two - via_one).norm() < 1e-12);

  const RelativePose round = compose(a, inverse(a));
  CHECK(quat_angle(round.rotation, Eigen::Quaterniond::Identity()) < 1e-12);
  CHECK(round.translation.norm() < 1e-12);
}
