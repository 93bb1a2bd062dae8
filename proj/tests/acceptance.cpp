// End-to-end acceptance checks. Each test case prints one PASS/FAIL line so a
// run's verdict is readable straight from the log.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rodrecon/baseline.hpp"
#include "rodrecon/config.hpp"
#include "rodrecon/io.hpp"

using namespace rodrecon;

namespace {

using clock_type = std::chrono::steady_clock;

struct Stopwatch {
  clock_type::time_point t0 = clock_type::now();
  double seconds() const {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
  }
};

void report(int index, const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("[criterion %2d] %-26s %s (%s, %.1f s)\n", index, name, ok ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RODRECON_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

geom::Pose euler_se3(const geom::Twist& xi, double h, int substeps) {
  geom::Pose q;
  const double d = h / substeps;
  const geom::Mat3 w = geom::hat(xi.angular);
  for (int i = 0; i < substeps; ++i) {
    q.position += d * (q.rotation * xi.linear);
    q.rotation = q.rotation * (geom::Mat3::Identity() + d * w);
  }
  return q;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

std::vector<rod::MeasurementSet> held_out_frames(const cli::PipelineConfig& cfg,
                                                 const reduction::BasisSet& basis, int count,
                                                 datagen::TrainingSet* raw = nullptr) {
  datagen::NoiseModel noise = cfg.noise;
  noise.seed = datagen::mix_seed(cfg.seed, 100);
  const datagen::TrainingSet set = datagen::build_training_set(
      basis, cfg.rod, geom::Pose::Identity(), cfg.marker_arclengths(), count, noise,
      datagen::mix_seed(cfg.seed, 200));
  std::vector<rod::MeasurementSet> frames;
  frames.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    frames.push_back(datagen::measurements_from_features(set.marker_s, set.features.col(k)));
  }
  if (raw) *raw = set;
  return frames;
}

// Octopus artifacts are expensive; build once and share across criteria 6-8.
struct OctopusRun {
  cli::PipelineConfig cfg;
  reduction::BasisSet basis;
  net::MlpModel model;
  std::vector<rod::MeasurementSet> frames;  // 500 held-out frames
  std::vector<double> errors;               // per-frame e_t
};

const OctopusRun& octopus_run() {
  static OctopusRun* run = [] {
    auto* r = new OctopusRun;
    r->cfg = cli::preset_octopus();
    const auto dataset = datagen::generate_initial_dataset(r->cfg.surrogate);
    reduction::PcaOptions opts;
    opts.inextensible = r->cfg.inextensible;
    r->basis = reduction::fit_pca(dataset, r->cfg.n_basis, opts);
    const auto training = datagen::build_training_set(
        r->basis, r->cfg.rod, geom::Pose::Identity(), r->cfg.marker_arclengths(),
        r->cfg.training_samples, r->cfg.noise, datagen::mix_seed(r->cfg.seed, 10));
    auto [model, rep] =
        net::train(r->cfg.train, training, r->basis, r->cfg.rod, geom::Pose::Identity());
    r->model = std::move(model);
    r->frames = held_out_frames(r->cfg, r->basis, 500);
    for (const auto& frame : r->frames) {
      r->errors.push_back(
          net::infer(r->model, r->basis, r->cfg.rod, geom::Pose::Identity(), frame).error);
    }
    return r;
  }();
  return *run;
}

std::vector<baseline::BenchmarkRow> octopus_benchmark_rows() {
  static std::vector<baseline::BenchmarkRow>* rows = [] {
    const OctopusRun& run = octopus_run();
    const std::vector<rod::MeasurementSet> subset(run.frames.begin(), run.frames.begin() + 100);
    baseline::SolverConfig solver;  // max_iters 10000, tol 1e-8
    return new std::vector<baseline::BenchmarkRow>(
        baseline::benchmark(subset, run.model, run.basis, run.cfg.rod, geom::Pose::Identity(),
                            run.cfg.train.eta, solver));
  }();
  return *rows;
}

}  // namespace

TEST_CASE("criterion 1: geometry exactness") {
  Stopwatch sw;
  const double L0 = 0.2;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_pos = 0, worst_rot = 0;
  for (int t = 0; t < 100; ++t) {
    const geom::Twist xi{geom::Vec3(u(rng), u(rng), u(rng)), geom::Vec3(u(rng), u(rng), u(rng))};
    const double h = 0.005;
    const geom::Pose p = geom::exp_se3(xi, h);
    const geom::Pose oracle = euler_se3(xi, h, 10000);
    worst_pos = std::max(worst_pos, (p.position - oracle.position).norm());
    worst_rot = std::max(worst_rot, (p.rotation - oracle.rotation).norm());
  }
  const bool ok = worst_pos <= 1e-7 * L0 && worst_rot <= 1e-8 && sw.seconds() < 5.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max pos err %.2e m, max rot err %.2e", worst_pos,
                worst_rot);
  report(1, "geometry exactness", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 2: kinematic closure") {
  Stopwatch sw;
  const double L0 = 0.2;
  rod::StrainField field;
  field.grid = rod::uniform_grid(L0, 200);
  rod::Strain6 v;
  v << 2 * M_PI / L0, 0, 0, 0, 0, 1;
  field.values = v.replicate(1, 200);
  const auto poses = rod::integrate_kinematics(field, geom::Pose::Identity());
  const double closure = poses.back().position.norm();
  const bool ok = closure <= 1e-6 * L0 && sw.seconds() < 1.0;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "tip-to-base distance %.2e m", closure);
  report(2, "kinematic closure", ok, detail, sw.seconds());
  CHECK(ok);
}

namespace {

rod::StrainField random_field(const Eigen::VectorXd& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  rod::StrainField f;
  f.grid = grid;
  f.values.resize(6, grid.size());
  for (Eigen::Index c = 0; c < grid.size(); ++c) {
    const double s = grid(c) / grid(grid.size() - 1);
    f.values.col(c) << 3 * std::sin(2 * M_PI * s) + u(rng), -2 * std::cos(M_PI * s) + u(rng),
        std::sin(3 * M_PI * s) + u(rng), 0.02 * u(rng), 0.02 * u(rng), 1 + 0.05 * u(rng);
  }
  return f;
}

double max_objective_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  rod::RodProperties props;
  props.rest_length = 0.2;
  props.n_nodes = 10;
  const Eigen::VectorXd grid = rod::uniform_grid(0.2, 10);
  const rod::StrainField f = random_field(grid, rng);
  const rod::StrainField target = random_field(grid, rng);
  const auto poses = rod::integrate_kinematics(target, geom::Pose::Identity());
  rod::MeasurementSet meas;
  for (int m = 1; m <= 4; ++m) {
    const double s = 0.2 * double(m) / 4;
    meas.markers.push_back({s, rod::interpolate_pose(poses, target, s)});
  }
  const double eta = 1e4;
  const rod::StrainMatrix g =
      rod::objective_gradient(f, geom::Pose::Identity(), meas, props, eta);

  rod::StrainMatrix fd(6, 10);
  for (Eigen::Index c = 0; c < 10; ++c) {
    for (int r = 0; r < 6; ++r) {
      const double step = 1e-6 * std::max(1.0, std::abs(f.values(r, c)));
      rod::StrainField plus = f, minus = f;
      plus.values(r, c) += step;
      minus.values(r, c) -= step;
      fd(r, c) = (rod::objective(plus, geom::Pose::Identity(), meas, props, eta) -
                  rod::objective(minus, geom::Pose::Identity(), meas, props, eta)) /
                 (2 * step);
    }
  }
  const double scale = fd.cwiseAbs().maxCoeff();
  double worst = 0;
  for (Eigen::Index c = 0; c < 10; ++c) {
    for (int r = 0; r < 6; ++r) {
      const double denom = std::max(std::abs(fd(r, c)), 1e-6 * scale);
      worst = std::max(worst, std::abs(g(r, c) - fd(r, c)) / denom);
    }
  }
  return worst;
}

double max_loss_gradient_error(std::uint64_t seed) {
  rod::RodProperties props;
  props.rest_length = 0.2;
  props.n_nodes = 20;

  datagen::SurrogateConfig scfg;
  scfg.rod = props;
  scfg.n_modes = 2;
  scfg.n_trajectories = 8;
  scfg.steps_per_trajectory = 10;
  scfg.seed = seed;
  const auto dataset = datagen::generate_initial_dataset(scfg);
  const auto basis = reduction::fit_pca(dataset, 2);

  Eigen::VectorXd marker_s(3);
  marker_s << 0.2 / 3, 0.4 / 3, 0.2;
  datagen::NoiseModel noise;
  noise.sigma_position = 2e-4;
  noise.seed = datagen::mix_seed(seed, 1);
  const auto data = datagen::build_training_set(basis, props, geom::Pose::Identity(), marker_s,
                                                3, noise, datagen::mix_seed(seed, 2));

  const net::MlpModel model = net::init_model(3, 6, 5, basis, props.rest_length, seed);
  const double eta = 1e4;
  const std::vector<int> batch = {0, 1, 2};
  net::ParameterGradients grads;
  net::loss_gradient(model, data.features, batch, basis, props, geom::Pose::Identity(),
                     marker_s, eta, grads);

  double max_abs = 0;
  for (const auto& g : grads.weights) max_abs = std::max(max_abs, g.cwiseAbs().maxCoeff());
  for (const auto& g : grads.biases) max_abs = std::max(max_abs, g.cwiseAbs().maxCoeff());

  std::mt19937_64 rng(seed ^ 0x5f5f);
  double worst = 0;
  auto probe = [&](auto setter, double analytic) {
    const double step = 1e-6;
    net::MlpModel plus = model, minus = model;
    setter(plus, step);
    setter(minus, -step);
    const double lp = net::loss(plus, data.features, batch, basis, props, geom::Pose::Identity(),
                                marker_s, eta);
    const double lm = net::loss(minus, data.features, batch, basis, props,
                                geom::Pose::Identity(), marker_s, eta);
    const double fd = (lp - lm) / (2 * step);
    const double denom = std::max(std::abs(fd), 1e-6 * max_abs);
    worst = std::max(worst, std::abs(analytic - fd) / denom);
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (int trial = 0; trial < 8; ++trial) {
      const Eigen::Index r = std::uniform_int_distribution<Eigen::Index>(
          0, model.weights[l].rows() - 1)(rng);
      const Eigen::Index c = std::uniform_int_distribution<Eigen::Index>(
          0, model.weights[l].cols() - 1)(rng);
      probe([&](net::MlpModel& m, double d) { m.weights[l](r, c) += d; },
            grads.weights[l](r, c));
      const Eigen::Index b = std::uniform_int_distribution<Eigen::Index>(
          0, model.biases[l].size() - 1)(rng);
      probe([&](net::MlpModel& m, double d) { m.biases[l](b) += d; }, grads.biases[l](b));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("criterion 3: gradient correctness") {
  Stopwatch sw;
  double worst_rod = 0, worst_net = 0;
  for (int t = 0; t < 20; ++t) worst_rod = std::max(worst_rod, max_objective_gradient_error(t));
  for (int t = 0; t < 20; ++t) {
    worst_net = std::max(worst_net, max_loss_gradient_error(1000 + t));
  }
  const bool ok = worst_rod <= 1e-5 && worst_net <= 1e-4 && sw.seconds() < 60.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "objective grad rel err %.2e, loss grad rel err %.2e",
                worst_rod, worst_net);
  report(3, "gradient correctness", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 4: pca fidelity") {
  Stopwatch sw;
  cli::PipelineConfig cfg = cli::preset_octopus();
  cfg.surrogate.n_modes = 3;
  const auto dataset = datagen::generate_initial_dataset(cfg.surrogate);
  const auto basis = reduction::fit_pca(dataset, 3);

  double min_retained = 1.0, worst_rt = 0;
  for (int i = 0; i < 6; ++i) {
    min_retained = std::min(min_retained, basis.strains[i].retained_variance_fraction);
  }
  for (const auto& sample : dataset.samples) {
    const Eigen::VectorXd coeffs = reduction::project(basis, sample);
    const rod::StrainField back = reduction::synthesize_strain(basis, coeffs);
    for (int i = 0; i < 6; ++i) {
      const double denom = sample.row(i).norm();
      if (denom > 0) {
        worst_rt = std::max(worst_rt, (back.values.row(i) - sample.row(i)).norm() / denom);
      }
    }
  }
  const bool ok = min_retained >= 0.99 && worst_rt <= 1e-2 && sw.seconds() < 30.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "min retained %.6f, max round-trip rel L2 %.2e",
                min_retained, worst_rt);
  report(4, "pca fidelity", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 5: training convergence") {
  Stopwatch sw;
  cli::PipelineConfig cfg = cli::preset_br2();
  const auto dataset = datagen::generate_initial_dataset(cfg.surrogate);
  reduction::PcaOptions opts;
  opts.inextensible = true;
  const auto basis = reduction::fit_pca(dataset, cfg.n_basis, opts);
  const auto training = datagen::build_training_set(
      basis, cfg.rod, geom::Pose::Identity(), cfg.marker_arclengths(), cfg.training_samples,
      cfg.noise, datagen::mix_seed(cfg.seed, 10));

  int converged_seeds = 0;
  double worst_ratio = 0;
  for (int r = 0; r < 10; ++r) {
    net::TrainConfig tc = cfg.train;
    tc.seed = datagen::mix_seed(cfg.train.seed, static_cast<std::uint64_t>(r));
    const auto [model, rep] = net::train(tc, training, basis, cfg.rod, geom::Pose::Identity());
    const double ratio = rep.val_loss_norm.back() / rep.val_loss_norm.front();
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio <= 1e-2) ++converged_seeds;
    if (r == 0) {
      net::save_model(model, "acceptance_br2_model.rodrecon");
      io::save_basis(basis, "acceptance_br2_basis.rodrecon");
    }
    std::printf("    seed %d: val norm loss %.3e -> %.3e (ratio %.3e)\n", r,
                rep.val_loss_norm.front(), rep.val_loss_norm.back(), ratio);
    std::fflush(stdout);
  }
  const bool ok = converged_seeds >= 8 && sw.seconds() < 1800.0;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%d/10 seeds reached 1e-2, worst ratio %.2e",
                converged_seeds, worst_ratio);
  report(5, "training convergence", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 6: reconstruction accuracy") {
  Stopwatch sw;
  const OctopusRun& run = octopus_run();
  double mean = 0;
  for (double e : run.errors) mean += e;
  mean /= double(run.errors.size());
  const double p95 = percentile(run.errors, 0.95);
  const bool ok = mean <= 2e-3 && p95 <= 5e-3;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "500 frames: mean e_t %.2e, p95 e_t %.2e", mean, p95);
  report(6, "reconstruction accuracy", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 7: speedup") {
  Stopwatch sw;
  const auto rows = octopus_benchmark_rows();
  const baseline::BenchmarkSummary s = baseline::summarize(rows);
  const double ratio = s.baseline_seconds_median / s.nn_seconds_median;
  std::vector<double> iters;
  for (const auto& r : rows) iters.push_back(double(r.baseline_iterations));
  const bool ok = ratio >= 1e3;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "median NN %.2e s vs baseline %.2e s, ratio %.1f, median iters %.0f",
                s.nn_seconds_median, s.baseline_seconds_median, ratio, percentile(iters, 0.5));
  report(7, "speedup", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 8: accuracy comparability") {
  Stopwatch sw;
  const auto rows = octopus_benchmark_rows();
  int comparable = 0;
  for (const auto& r : rows) {
    if (r.nn_norm_loss <= 10.0 * r.baseline_norm_loss) ++comparable;
  }
  const bool ok = comparable >= 90;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "NN within 10x baseline loss on %d/100 frames",
                comparable);
  report(8, "accuracy comparability", ok, detail, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 9: determinism") {
  Stopwatch sw;
  const std::string cfg = "acceptance_cfg.json";
  std::ofstream(cfg) << "{\n"
                     << "  \"rod_n_nodes\": 50,\n"
                     << "  \"surrogate_n_trajectories\": 8,\n"
                     << "  \"surrogate_steps_per_trajectory\": 10,\n"
                     << "  \"pca_n_basis\": 3,\n"
                     << "  \"train_epochs\": 3,\n"
                     << "  \"train_samples\": 256,\n"
                     << "  \"seed\": 11\n"
                     << "}\n";
  const std::string common = "--config " + cfg;
  bool ok = true;
  std::string first_diff = "all stages byte-identical";

  const std::vector<std::array<std::string, 2>> stages = {
      {"simulate " + common + " --out acc_ds%d.bin", "dataset"},
      {"pca " + common + " --in acc_ds1.bin --out acc_basis%d.bin", "basis"},
      {"sample " + common + " --basis acc_basis1.bin --out acc_ts%d.bin --frames-out "
       "acc_fr%d.bin --frames-count 5",
       "training set"},
      {"train " + common + " --data acc_ts1.bin --basis acc_basis1.bin --out acc_model%d.bin",
       "model"},
      {"infer " + common + " --model acc_model1.bin --basis acc_basis1.bin --frames acc_fr1.bin "
       "--out acc_et%d.csv",
       "inference CSV"}};
  for (const auto& [pattern, label] : stages) {
    for (int run = 1; run <= 2; ++run) {
      std::string args = pattern;
      std::string::size_type pos;
      while ((pos = args.find("%d")) != std::string::npos) {
        args.replace(pos, 2, std::to_string(run));
      }
      if (run_cli(args) != 0) {
        ok = false;
        first_diff = "stage failed: " + label;
      }
    }
  }
  if (ok) {
    const std::vector<std::array<std::string, 2>> outputs = {{"acc_ds", ".bin"},
                                                             {"acc_basis", ".bin"},
                                                             {"acc_ts", ".bin"},
                                                             {"acc_fr", ".bin"},
                                                             {"acc_model", ".bin"},
                                                             {"acc_et", ".csv"}};
    for (const auto& [stem, ext] : outputs) {
      if (read_file(stem + "1" + ext) != read_file(stem + "2" + ext)) {
        ok = false;
        first_diff = "mismatch in " + stem + ext;
      }
    }
  }
  for (const char* p :
       {"acc_ds1.bin", "acc_ds2.bin", "acc_basis1.bin", "acc_basis2.bin", "acc_ts1.bin",
        "acc_ts2.bin", "acc_fr1.bin", "acc_fr2.bin", "acc_model1.bin", "acc_model2.bin",
        "acc_et1.csv", "acc_et2.csv", "acceptance_cfg.json"}) {
    std::remove(p);
  }
  report(9, "determinism", ok, first_diff, sw.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 10: replay latency") {
  Stopwatch sw;
  // artifacts saved by criterion 5 (BR2 preset, seed 0)
  const cli::PipelineConfig cfg = cli::preset_br2();
  const auto basis = io::load_basis("acceptance_br2_basis.rodrecon");

  io::FrameLog log;
  datagen::TrainingSet frames_raw;
  held_out_frames(cfg, basis, 200, &frames_raw);
  log.marker_s = frames_raw.marker_s;
  log.features = frames_raw.features;
  log.timestamps = Eigen::VectorXd::LinSpaced(200, 0.0, 199.0 / cfg.replay_rate_hz);
  io::save_frame_log(log, "acceptance_br2_frames.rodrecon");

  const int rc = run_cli(
      "replay --preset br2 --model acceptance_br2_model.rodrecon --basis "
      "acceptance_br2_basis.rodrecon --frames acceptance_br2_frames.rodrecon --out "
      "acceptance_replay.csv");
  bool ok = rc == 0;
  double p95 = -1;
  if (ok) {
    std::ifstream in("acceptance_replay.csv");
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> latencies;
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.find(',', line.find(',') + 1);
      const auto c = line.find(',', b + 1);
      latencies.push_back(std::stod(line.substr(b + 1, c - b - 1)));
    }
    ok = latencies.size() == 200;
    if (ok) {
      p95 = percentile(latencies, 0.95);
      ok = p95 < 0.010;
    }
  }
  for (const char* p : {"acceptance_br2_frames.rodrecon", "acceptance_replay.csv",
                        "acceptance_br2_model.rodrecon", "acceptance_br2_basis.rodrecon"}) {
    std::remove(p);
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "100 Hz replay, 200 frames, p95 latency %.2e s", p95);
  report(10, "replay latency", ok, detail, sw.seconds());
  CHECK(ok);
}
