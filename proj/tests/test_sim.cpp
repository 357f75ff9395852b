#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flexstereo/sim.hpp"
#include "flexstereo/wing_prior.hpp"
#include "oracles.hpp"

using namespace flexstereo;

namespace {

constexpr double kDeg = M_PI / 180.0;

SimParams default_params(uint64_t seed = 1) {
  SimParams p;
  p.seed = seed;
  return p;
}

Eigen::Vector3d specific_force(const RigState& rig,
                               const Eigen::Vector3d& gravity) {
  return rig.orientation.conjugate() * (rig.acc - gravity);
}

}  // namespace

TEST_CASE("disturbance force: zero config, periodic value, determinism") {
  SUBCASE("all-zero magnitudes give zero force") {
    DisturbanceConfig cfg;
    cfg.periodic_amp = 0.0;
    cfg.gust_mean = 0.0;
    cfg.gust_std = 0.0;
    const DisturbanceSequence seq(cfg, 100.0, 7);
    for (double t = 0.0; t < 50.0; t += 0.37) {
      CHECK(seq.force(t, WingSide::kLeft) == 0.0);
      CHECK(seq.force(t, WingSide::kRight) == 0.0);
    }
  }
  SUBCASE("periodic term evaluates the sine at 2 pi f t") {
    DisturbanceConfig cfg;  // a_p = 0.25 N, f_p = 1.5 Hz
    cfg.gust_mean = 0.0;
    cfg.gust_std = 0.0;
    const DisturbanceSequence seq(cfg, 10.0, 7);
    // t = 1/6 s: sin(2 pi * 1.5 / 6) = sin(pi/2) = 1
    CHECK(seq.force(1.0 / 6.0, WingSide::kLeft) ==
          doctest::Approx(0.25).epsilon(1e-12));
    // in phase on both tips
    CHECK(seq.force(1.0 / 6.0, WingSide::kRight) ==
          doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("gusts: active window, per-side independence, fixed seed") {
    DisturbanceConfig cfg;
    cfg.periodic_amp = 0.0;
    const DisturbanceSequence a(cfg, 100.0, 42);
    const DisturbanceSequence b(cfg, 100.0, 42);
    const DisturbanceSequence c(cfg, 100.0, 43);
    bool sides_differ = false;
    bool seeds_differ = false;
    for (double t = 0.05; t < 90.0; t += 8.0) {
      CHECK(a.force(t, WingSide::kLeft) == b.force(t, WingSide::kLeft));
      CHECK(a.force(t, WingSide::kRight) == b.force(t, WingSide::kRight));
      sides_differ |=
          a.force(t, WingSide::kLeft) != a.force(t, WingSide::kRight);
      seeds_differ |=
          a.force(t, WingSide::kLeft) != c.force(t, WingSide::kLeft);
      // gust is on inside the duration window and off after it
      CHECK(std::abs(a.force(t, WingSide::kLeft)) > 0.1);
      CHECK(a.force(t + 0.5, WingSide::kLeft) == 0.0);
    }
    CHECK(sides_differ);
    CHECK(seeds_differ);
  }
}

TEST_CASE("step_wing_dynamics basics") {
  const WingParams wp;
  const RigGeometry geom;
  SUBCASE("zero force, zero state stays zero") {
    WingJointState s;
    for (int i = 0; i < 100; ++i) {
      s = step_wing_dynamics(s, 0.0, WingSide::kLeft, wp, geom, 1e-3);
    }
    CHECK(s.roll == 0.0);
    CHECK(s.pitch == 0.0);
  }
  SUBCASE("rejects oversize steps") {
    WingJointState s;
    CHECK_THROWS_AS(
        (void)step_wing_dynamics(s, 0.0, WingSide::kLeft, wp, geom, 5e-3),
        std::invalid_argument);
  }
  SUBCASE("names the diverging joint") {
    WingJointState s;
    s.roll = M_PI / 4.0 - 1e-4;
    s.roll_rate = 10.0;
    try {
      for (int i = 0; i < 10; ++i) {
        s = step_wing_dynamics(s, 0.0, WingSide::kRight, wp, geom, 1e-3);
      }
      FAIL("expected the validity envelope to trip");
    } catch (const std::runtime_error& e) {
      const std::string what = e.what();
      CHECK(what.find("right") != std::string::npos);
      CHECK(what.find("roll") != std::string::npos);
    }
  }
}

TEST_CASE("wing settles to the static equilibrium") {
  const WingParams wp;
  const RigGeometry geom;
  const double force = 0.5;
  WingJointState s;
  for (int i = 0; i < 30000; ++i) {
    s = step_wing_dynamics(s, force, WingSide::kLeft, wp, geom, 1e-3);
  }
  const double roll_eq =
      force * (geom.inner_span + geom.outer_span) / wp.stiffness_roll;
  const double pitch_eq = -force * geom.chord_offset / wp.stiffness_pitch;
  CHECK(std::abs(s.roll - roll_eq) < 1e-3 * std::abs(roll_eq));
  CHECK(std::abs(s.pitch - pitch_eq) < 1e-3 * std::abs(pitch_eq));
}

TEST_CASE("free decay matches the linear damping ratio") {
  const WingParams wp;
  const RigGeometry geom;
  WingJointState s;
  s.roll = 0.1;
  std::vector<double> history;
  for (int i = 0; i < 4000; ++i) {
    s = step_wing_dynamics(s, 0.0, WingSide::kLeft, wp, geom, 1e-3);
    history.push_back(s.roll);
  }
  std::vector<double> peaks;
  for (size_t i = 1; i + 1 < history.size(); ++i) {
    if (history[i] > history[i - 1] && history[i] > history[i + 1] &&
        history[i] > 1e-4) {
      peaks.push_back(history[i]);
    }
  }
  REQUIRE(peaks.size() >= 2);
  const double decrement = std::log(peaks[0] / peaks[1]);
  const double zeta_measured =
      decrement / std::sqrt(4.0 * M_PI * M_PI + decrement * decrement);
  const double zeta_true =
      wp.damping_roll /
      (2.0 * std::sqrt(wp.stiffness_roll * wp.inertia_roll));
  CHECK(std::abs(zeta_measured / zeta_true - 1.0) < 0.05);
}

TEST_CASE("body trajectory: start, derivatives, periodicity") {
  const TrajectoryConfig cfg;
  SUBCASE("configured start pose") {
    const RigidMotion m = body_trajectory(0.0, cfg);
    CHECK((m.pos - Eigen::Vector3d(0.0, 0.0, cfg.altitude)).norm() < 1e-12);
  }
  SUBCASE("velocity and acceleration are consistent derivatives") {
    const double h = 1e-5;
    for (const double t : {0.7, 3.3, 11.0, 26.5}) {
      const RigidMotion m = body_trajectory(t, cfg);
      const RigidMotion mp = body_trajectory(t + h, cfg);
      const RigidMotion mm = body_trajectory(t - h, cfg);
      CHECK(((mp.pos - mm.pos) / (2.0 * h) - m.vel).norm() < 1e-6);
      CHECK(((mp.vel - mm.vel) / (2.0 * h) - m.acc).norm() < 1e-6);
      // body-frame angular velocity via the rotation log
      const Eigen::Quaterniond q(m.frame.rotation);
      const Eigen::Quaterniond qp(mp.frame.rotation);
      const Eigen::Quaterniond qm(mm.frame.rotation);
      const Eigen::Vector3d w_fd =
          quat_to_small_angle(qm.conjugate() * qp) / (2.0 * h);
      CHECK((w_fd - m.frame.omega).norm() < 1e-6);
      // angular acceleration from the angular velocities of the probes
      const Eigen::Vector3d wp_v = mp.frame.omega;
      const Eigen::Vector3d wm_v = mm.frame.omega;
      CHECK(((wp_v - wm_v) / (2.0 * h) - m.frame.omega_dot).norm() < 1e-5);
    }
  }
  SUBCASE("closed path") {
    for (const double t : {0.0, 5.1, 17.9}) {
      const RigidMotion a = body_trajectory(t, cfg);
      const RigidMotion b = body_trajectory(t + cfg.period, cfg);
      CHECK((a.pos - b.pos).norm() < 1e-9);
      CHECK((a.frame.rotation - b.frame.rotation).norm() < 1e-9);
    }
  }
}

TEST_CASE("rig kinematics at rest: baseline and toe-in") {
  const RigGeometry geom;
  const RigidMotion body;  // identity, static
  const WingJointState rest;
  const Eigen::Vector2d no_acc = Eigen::Vector2d::Zero();
  const RigState rig1 =
      rig_kinematics(body, rest, no_acc, WingSide::kLeft, geom);
  const RigState rig2 =
      rig_kinematics(body, rest, no_acc, WingSide::kRight, geom);
  const RelativePose t = relative_pose_between(rig1, rig2);

  // baseline length is the full span; expressed in the toed-in rig-1 frame
  // the vector picks up a sin(toe) forward component
  CHECK(t.translation.norm() ==
        doctest::Approx(geom.baseline()).epsilon(1e-12));
  const Eigen::Vector3d expected =
      Eigen::AngleAxisd(geom.toe_in, Eigen::Vector3d::UnitZ()) *
      Eigen::Vector3d(0.0, -geom.baseline(), 0.0);
  CHECK((t.translation - expected).norm() < 1e-12);
  // optical axes converge: relative yaw of twice the toe-in
  const Eigen::Vector3d rot = quat_to_small_angle(t.rotation);
  CHECK(rot.z() == doctest::Approx(2.0 * geom.toe_in).epsilon(1e-12));
  CHECK(std::abs(rot.x()) < 1e-12);
  CHECK(std::abs(rot.y()) < 1e-12);
}

TEST_CASE("rig kinematics: symmetric and mirrored flap") {
  const RigGeometry geom;
  const RigidMotion body;
  const Eigen::Vector2d no_acc = Eigen::Vector2d::Zero();
  const double angle = 0.02;

  SUBCASE("equal signed joint angles cancel in relative roll") {
    WingJointState w;
    w.roll = angle;
    const RigState rig1 = rig_kinematics(body, w, no_acc, WingSide::kLeft, geom);
    const RigState rig2 =
        rig_kinematics(body, w, no_acc, WingSide::kRight, geom);
    const Eigen::Vector3d rot =
        quat_to_small_angle(relative_pose_between(rig1, rig2).rotation);
    CHECK(std::abs(rot.x()) < 1e-12);
  }
  SUBCASE("mirrored joint angles (both tips up) produce relative roll") {
    WingJointState left, right;
    left.roll = angle;
    right.roll = -angle;
    const RigState rig1 =
        rig_kinematics(body, left, no_acc, WingSide::kLeft, geom);
    const RigState rig2 =
        rig_kinematics(body, right, no_acc, WingSide::kRight, geom);
    const RelativePose t = relative_pose_between(rig1, rig2);
    const Eigen::Vector3d rot = quat_to_small_angle(t.rotation);
    CHECK(rot.x() == doctest::Approx(-2.0 * angle).epsilon(0.02));
    // both tips rise equally, so the z offset stays small while the
    // relative z component comes from the rolled frame-1 axes
    CHECK(std::abs(t.translation.z()) > 1e-4);
  }
}

TEST_CASE("simulated rig motion is differentially consistent") {
  Simulator sim(default_params());
  for (int k = 0; k < 230; ++k) {
    sim.advance();
  }
  const double h = 1e-5;
  const SimSample s0 = sim.sample();
  Simulator fwd = sim;
  fwd.advance_by(h);
  const SimSample sp = fwd.sample();
  Simulator bwd = sim;
  bwd.advance_by(-h);
  const SimSample sm = bwd.sample();

  for (const auto& [now, plus, minus] :
       {std::tie(s0.rig1, sp.rig1, sm.rig1),
        std::tie(s0.rig2, sp.rig2, sm.rig2)}) {
    CHECK(((plus.pos - minus.pos) / (2.0 * h) - now.vel).norm() < 1e-5);
    CHECK(((plus.vel - minus.vel) / (2.0 * h) - now.acc).norm() < 1e-4);
    const Eigen::Vector3d w_fd =
        quat_to_small_angle(minus.orientation.conjugate() * plus.orientation) /
        (2.0 * h);
    CHECK((w_fd - now.omega).norm() < 1e-5);
  }
}

TEST_CASE("hovering static rig measures gravity only") {
  SimParams p = default_params();
  p.trajectory.amp_x = 0.0;
  p.trajectory.amp_y = 0.0;
  p.trajectory.yaw_amp = 0.0;
  p.trajectory.pitch_amp = 0.0;
  p.trajectory.roll_amp = 0.0;
  p.disturbance.periodic_amp = 0.0;
  p.disturbance.gust_mean = 0.0;
  p.disturbance.gust_std = 0.0;
  Simulator sim(p);
  for (int i = 0; i < 50; ++i) {
    sim.advance();
  }
  ImuNoiseConfig noiseless;
  noiseless.gyro_var = 0.0;
  noiseless.accel_var = 0.0;
  ImuSynthesizer synth(noiseless, 5);
  const ImuPair m = synth.synth(sim.sample());
  CHECK(m.omega1.norm() < 1e-12);
  CHECK(m.omega2.norm() < 1e-12);
  CHECK(m.accel1.norm() == doctest::Approx(9.81).epsilon(1e-9));
  CHECK(m.accel2.norm() == doctest::Approx(9.81).epsilon(1e-9));
}

TEST_CASE("gravity cancels in the relative velocity dynamics") {
  // dv/dt = C a2 - a1 - w1 x v evaluated on noise-free specific forces must
  // match the numeric derivative of the true relative velocity.
  Simulator sim(default_params(3));
  const Eigen::Vector3d gravity(0.0, 0.0, -9.81);
  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < 12; ++probe) {
    for (int k = 0; k < 37; ++k) {
      sim.advance();
    }
    const SimSample s = sim.sample();
    const Eigen::Vector3d f1 = specific_force(s.rig1, gravity);
    const Eigen::Vector3d f2 = specific_force(s.rig2, gravity);
    const Eigen::Vector3d v = relative_velocity_between(s.rig1, s.rig2);
    const Eigen::Matrix3d c = quat_to_rotmat(s.t_true.rotation);
    const Eigen::Vector3d v_dot_model =
        c * f2 - f1 - s.rig1.omega.cross(v);

    Simulator fwd = sim;
    fwd.advance_by(h);
    Simulator bwd = sim;
    bwd.advance_by(-h);
    const SimSample sp = fwd.sample();
    const SimSample sm = bwd.sample();
    const Eigen::Vector3d v_dot_fd =
        (relative_velocity_between(sp.rig1, sp.rig2) -
         relative_velocity_between(sm.rig1, sm.rig2)) /
        (2.0 * h);
    worst = std::max(worst, (v_dot_model - v_dot_fd).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("IMU noise multiplier scales the residual variance") {
  SimParams p = default_params();
  Simulator sim(p);
  sim.advance();
  const SimSample s = sim.sample();

  ImuNoiseConfig base;
  base.multiplier = 4.0;
  ImuSynthesizer synth(base, 11);
  double sum_sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ImuPair m = synth.synth(s);
    sum_sq += (m.omega1 - s.rig1.omega).squaredNorm();
  }
  const double var = sum_sq / (3.0 * n);
  CHECK(std::abs(var / (4.0 * base.gyro_var) - 1.0) < 0.1);
}

TEST_CASE("synthetic vision: exactness, determinism, outliers") {
  Simulator sim(default_params(9));
  sim.advance();
  const RelativePose truth = sim.sample().t_true;

  SUBCASE("noise-free generator reproduces the truth") {
    VisionNoiseConfig cfg;
    cfg.sigma_rot = 0.0;
    cfg.sigma_trans = 0.0;
    cfg.outlier_prob = 0.0;
    VisionSynthesizer synth(cfg, 21);
    const VisualMeasurement m = synth.synth(0.1, truth);
    CHECK(quat_angle(m.q, truth.rotation) < 1e-12);
    CHECK((m.dir - truth.translation.normalized()).norm() < 1e-12);
  }
  SUBCASE("fixed seed gives an identical stream") {
    VisionNoiseConfig cfg;
    VisionSynthesizer a(cfg, 33);
    VisionSynthesizer b(cfg, 33);
    for (int i = 0; i < 50; ++i) {
      const VisualMeasurement ma = a.synth(0.1 * i, truth);
      const VisualMeasurement mb = b.synth(0.1 * i, truth);
      CHECK(ma.q.coeffs() == mb.q.coeffs());
      CHECK(ma.dir == mb.dir);
    }
  }
  SUBCASE("permanent outliers are gated out almost always") {
    VisionNoiseConfig cfg;
    cfg.outlier_prob = 1.0;
    VisionSynthesizer synth(cfg, 55);

    WingPrior prior;
    prior.q_mu = truth.rotation;
    prior.p_mu = truth.translation;
    prior.sigma_theta = Eigen::Vector3d(1.9, 7.1e-3, 1.3e-2) * kDeg;
    prior.sigma_p = Eigen::Vector3d(0.27e-3, 3.0e-3, 50.5e-3);

    int rejected = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const VisualMeasurement m = synth.synth(0.1 * i, truth);
      const FusedPoseMeasurement out = gate(prior, m, GateConfig{2.0});
      if (quat_angle(out.q, prior.q_mu) < 1e-14 &&
          (out.p - prior.p_mu).norm() < 1e-14) {
        ++rejected;
      }
    }
    CHECK(rejected >= 950);
  }
}

TEST_CASE("simulation streams are deterministic") {
  Simulator a(default_params(77));
  Simulator b(default_params(77));
  for (int k = 0; k < 500; ++k) {
    a.advance();
    b.advance();
  }
  const SimSample sa = a.sample();
  const SimSample sb = b.sample();
  CHECK(sa.t_true.rotation.coeffs() == sb.t_true.rotation.coeffs());
  CHECK(sa.t_true.translation == sb.t_true.translation);
  CHECK(sa.rig1.acc == sb.rig1.acc);
  CHECK(sa.left.roll == sb.left.roll);
}

TEST_CASE("wing energy stays bounded over a ten-minute run") {
  const WingParams wp;
  const RigGeometry geom;
  DisturbanceConfig cfg;
  const DisturbanceSequence dist(cfg, 620.0, 5);
  WingJointState left, right;
  double max_energy = 0.0;
  const double dt = 1e-3;
  for (int i = 0; i < 600000; ++i) {
    const double t = i * dt;
    left = step_wing_dynamics(left, dist.force(t, WingSide::kLeft),
                              WingSide::kLeft, wp, geom, dt);
    right = step_wing_dynamics(right, dist.force(t, WingSide::kRight),
                               WingSide::kRight, wp, geom, dt);
    max_energy = std::max(
        max_energy, std::max(wing_energy(left, wp), wing_energy(right, wp)));
  }
  CHECK(max_energy < 2.0);
}

TEST_CASE("relative roll spread lands near the configured target") {
  Simulator sim(default_params(1));
  std::vector<RelativePose> samples;
  for (int k = 0; k < 6000; ++k) {
    sim.advance();
    samples.push_back(sim.sample().t_true);
  }
  const WingPrior prior = calibrate_prior(samples);
  const double roll_std_deg = prior.sigma_theta.x() / kDeg;
  // within a factor two of the 1.9 degree target
  CHECK(roll_std_deg > 0.95);
  CHECK(roll_std_deg < 3.8);
}

TEST_CASE("pure prediction tracks the truth on noise-free data") {
  // Integrator-error-only bound: the zeroth-order predictor must resolve
  // the flap spectrum, so the drift check runs at a high prediction rate
  // (the error shrinks quadratically with the step; at 100 Hz the gust
  // ringing rectifies into a visible translation drift).
  SimParams params = default_params(13);
  params.imu_rate = 800.0;
  params.substeps = 2;
  Simulator sim(params);
  const Eigen::Vector3d gravity(0.0, 0.0, -9.81);

  SimSample s = sim.sample();
  FilterState x;
  x.q = s.t_true.rotation;
  x.p = s.t_true.translation;
  x.v = relative_velocity_between(s.rig1, s.rig2);
  x.omega1 = s.rig1.omega;
  x.omega2 = s.rig2.omega;
  x.a1 = specific_force(s.rig1, gravity);
  x.a2 = specific_force(s.rig2, gravity);

  const double dt = 1.0 / params.imu_rate;
  const double duration = 30.0;
  double max_rot = 0.0;
  double max_trans = 0.0;
  const int steps = static_cast<int>(duration / dt);
  for (int k = 1; k <= steps; ++k) {
    // zeroth-order prediction exactly as the filter does it
    const StateRates rates = state_derivative(x);
    const Eigen::Vector4d qv =
        Eigen::Vector4d(x.q.w(), x.q.x(), x.q.y(), x.q.z()) + dt * rates.q_dot;
    x.q = Eigen::Quaterniond(qv(0), qv(1), qv(2), qv(3)).normalized();
    x.p += dt * rates.p_dot;
    x.v += dt * rates.v_dot;

    sim.advance();
    s = sim.sample();
    // perfect IMU: replace the rate / specific-force states with truth
    x.omega1 = s.rig1.omega;
    x.omega2 = s.rig2.omega;
    x.a1 = specific_force(s.rig1, gravity);
    x.a2 = specific_force(s.rig2, gravity);

    max_rot = std::max(max_rot, quat_angle(x.q, s.t_true.rotation));
    max_trans = std::max(max_trans, (x.p - s.t_true.translation).norm());
  }
  // drift slower than 1e-4 rad and 1e-3 m per second of flight
  CHECK(max_rot < 1e-4 * duration);
  CHECK(max_trans < 1e-3 * duration);
}
