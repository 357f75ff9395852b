#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "flexstereo/config.hpp"
#include "flexstereo/harness.hpp"
#include "flexstereo/io.hpp"
#include "flexstereo/report.hpp"
#include "flexstereo/wing_prior.hpp"

namespace {

using namespace flexstereo;

std::string default_out_dir() {
  if (const char* env = std::getenv("FLEXSTEREO_OUT")) {
    return env;
  }
  return "flexstereo_out";
}

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = default_out_dir();
  std::string mode;
  uint64_t seed = 0;
  bool seed_set = false;
};

ExperimentConfig make_config(const GlobalOpts& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    cfg = load_config(g.config_path);
  }
  if (g.seed_set) {
    cfg.seed = g.seed;
  }
  if (!g.mode.empty()) {
    cfg.mode = parse_mode(g.mode);
  }
  cfg.validate();
  return cfg;
}

void print_summary(const RunReport& report) {
  std::cout << render_summary(report.mode, report.seed, report.warmup,
                              report.aggregates);
  std::fprintf(stderr, "wall time: %.2f s\n", report.wall_time_s);
}

int cmd_simulate(const GlobalOpts& g) {
  const ExperimentConfig cfg = make_config(g);
  const SimStream stream = generate_stream(cfg);
  std::filesystem::create_directories(g.out_dir);
  const std::string path =
      (std::filesystem::path(g.out_dir) / "stream.txt").string();
  write_stream(stream, path);
  std::cout << "wrote " << path << " (" << stream.imu.size()
            << " IMU samples, " << stream.vision.size()
            << " vision epochs)\n";
  return 0;
}

int cmd_estimate(const GlobalOpts& g, const std::string& stream_path,
                 const std::string& prior_path) {
  ExperimentConfig cfg = make_config(g);

  WingPrior prior_calibrated;
  SimStream stream;
  if (!stream_path.empty()) {
    stream = read_stream(stream_path);
    cfg.imu_rate = stream.imu_rate;
    cfg.vision_rate = stream.vision_rate;
    cfg.duration = static_cast<double>(stream.imu.size()) / stream.imu_rate;
    cfg.imu.multiplier = stream.multiplier;
    cfg.validate();
  } else {
    stream = generate_stream(cfg);
  }
  if (!prior_path.empty()) {
    prior_calibrated = load_prior(prior_path);
  } else {
    prior_calibrated = calibrate_from_sim(cfg);
  }

  const RunReport report = run_on_stream(cfg, stream, prior_calibrated);
  emit_report(report, g.out_dir);
  print_summary(report);
  std::cout << "report written to " << g.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& series_path,
                 const std::string& depth_path, bool recompute_depth) {
  SeriesData data = read_series(series_path, depth_path);
  if (recompute_depth) {
    const ExperimentConfig cfg = make_config(g);
    data.depth_series =
        compute_depth_series(cfg, data.series, data.prior_calibrated.mean());
  }
  const Aggregates agg = aggregate_series(data.series, data.depth_series,
                                          data.prior_calibrated, data.warmup);
  const std::string summary =
      render_summary(data.mode, data.seed, data.warmup, agg);
  std::filesystem::create_directories(g.out_dir);
  const std::string path =
      (std::filesystem::path(g.out_dir) / "summary.txt").string();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << summary;
  std::cout << summary;
  return 0;
}

int cmd_sweep(const GlobalOpts& g) {
  const ExperimentConfig cfg = make_config(g);
  const std::vector<SweepRow> rows = noise_sweep(cfg, cfg.noise_multipliers);
  std::filesystem::create_directories(g.out_dir);
  const std::string path =
      (std::filesystem::path(g.out_dir) / "sweep.txt").string();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "# flexstereo noise sweep 1\n";
  out << "# columns: multiplier median_step_normalized normalized_rmse\n";
  char line[160];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof(line), "row m=%.17g med=%.17g nrmse=%.17g\n",
                  r.multiplier, r.median_step_normalized, r.normalized_rmse);
    out << line;
  }
  std::printf("%-12s %-24s %s\n", "multiplier", "median_step_normalized",
              "normalized_rmse");
  for (const SweepRow& r : rows) {
    std::printf("%-12g %-24.6g %.6g\n", r.multiplier,
                r.median_step_normalized, r.normalized_rmse);
  }
  std::cout << "table written to " << path << "\n";
  return 0;
}

int cmd_calibrate(const GlobalOpts& g, const std::string& stream_path) {
  const ExperimentConfig cfg = make_config(g);
  WingPrior prior;
  if (!stream_path.empty()) {
    const SimStream stream = read_stream(stream_path);
    std::vector<RelativePose> samples;
    samples.reserve(stream.truth.size());
    for (const TruthRecord& r : stream.truth) {
      samples.push_back(r.t_true);
    }
    prior = calibrate_prior(samples, cfg.prior_sigma_floor);
  } else {
    prior = calibrate_from_sim(cfg);
  }
  std::filesystem::create_directories(g.out_dir);
  const std::string path =
      (std::filesystem::path(g.out_dir) / "prior.txt").string();
  save_prior(prior, path);
  const double deg = 180.0 / M_PI;
  std::printf("sigma_theta_deg = %.4g %.4g %.4g\n", prior.sigma_theta.x() * deg,
              prior.sigma_theta.y() * deg, prior.sigma_theta.z() * deg);
  std::printf("sigma_p_mm      = %.4g %.4g %.4g\n", prior.sigma_p.x() * 1e3,
              prior.sigma_p.y() * 1e3, prior.sigma_p.z() * 1e3);
  std::cout << "prior written to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "flexstereo: time-varying baseline estimation and depth-map "
      "evaluation for flexible-wing stereo rigs"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir,
                 "output directory (default $FLEXSTEREO_OUT or "
                 "./flexstereo_out)");
  app.add_option("--mode", g.mode,
                 "estimator mode: fixed, visual+prior, imu+prior, full");
  auto* seed_opt = app.add_option("--seed", g.seed, "master random seed");
  bool print_config = false;
  app.add_flag("--print-config", print_config,
               "print the effective configuration and exit");

  auto* simulate = app.add_subcommand("simulate", "dump a sensor stream");
  auto* estimate =
      app.add_subcommand("estimate", "run the estimator and write reports");
  std::string stream_path, prior_path;
  estimate->add_option("--stream", stream_path,
                       "replay a previously dumped stream file")
      ->check(CLI::ExistingFile);
  estimate->add_option("--prior", prior_path,
                       "calibrated prior file (inflation still applies)")
      ->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand(
      "evaluate", "recompute the summary from an emitted series");
  std::string series_path, depth_path;
  bool recompute_depth = false;
  evaluate->add_option("--series", series_path, "series.txt to re-ingest")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--depth", depth_path, "depth.txt emitted with it");
  evaluate->add_flag("--recompute-depth", recompute_depth,
                     "recompute depth metrics from the poses (needs the "
                     "original config)");

  auto* sweep =
      app.add_subcommand("sweep-noise", "normalized RMSE vs IMU noise level");
  auto* calibrate = app.add_subcommand("calibrate-prior",
                                       "calibrate and save the wing prior");
  std::string calib_stream;
  calibrate->add_option("--stream", calib_stream,
                        "calibrate from a stream dump instead of a fresh "
                        "simulation segment")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (print_config) {
      std::cout << flexstereo::dump_config(make_config(g));
      return 0;
    }
    if (simulate->parsed()) {
      return cmd_simulate(g);
    }
    if (estimate->parsed()) {
      return cmd_estimate(g, stream_path, prior_path);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(g, series_path, depth_path, recompute_depth);
    }
    if (sweep->parsed()) {
      return cmd_sweep(g);
    }
    if (calibrate->parsed()) {
      return cmd_calibrate(g, calib_stream);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
