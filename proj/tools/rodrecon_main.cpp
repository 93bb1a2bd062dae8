// Command-line pipeline: simulate -> pca -> sample -> train -> infer /
// benchmark / replay. Every stage reads and writes versioned artifacts and
// prints a one-line machine-parsable summary on success.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "rodrecon/baseline.hpp"
#include "rodrecon/config.hpp"
#include "rodrecon/errors.hpp"
#include "rodrecon/hash.hpp"
#include "rodrecon/io.hpp"

namespace rr = rodrecon;
using rr::cli::PipelineConfig;

namespace {

struct CommonOpts {
  std::string preset = "octopus";
  std::string config_path;
  std::int64_t seed = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--preset", opts.preset, "testbed preset: octopus or br2");
  cmd->add_option("--config", opts.config_path, "flat JSON config overriding the preset");
  cmd->add_option("--seed", opts.seed, "master seed override");
  cmd->add_option("--threads", opts.threads, "worker threads (1 = reproducible)");
}

PipelineConfig resolve_config(const CommonOpts& opts) {
  PipelineConfig cfg = rr::cli::preset_by_name(opts.preset);
  if (!opts.config_path.empty()) {
    cfg = rr::cli::load_config(opts.config_path, cfg);
  }
  if (opts.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(opts.seed);
    cfg.finalize();
  }
  return cfg;
}

std::map<std::string, std::string> input_stamp(const std::vector<std::string>& paths) {
  std::map<std::string, std::string> meta;
  rr::Fnv1a h;
  for (const auto& p : paths) {
    const std::uint64_t c = rr::io::file_checksum(p);
    h.update(&c, sizeof(c));
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.digest()));
  meta["input_checksum"] = buf;
  return meta;
}

rr::io::FrameLog make_frame_log(const PipelineConfig& cfg, const rr::reduction::BasisSet& basis,
                                int count, std::uint64_t seed_offset) {
  rr::datagen::NoiseModel noise = cfg.noise;
  noise.seed = rr::datagen::mix_seed(cfg.seed, 100 + seed_offset);
  const rr::datagen::TrainingSet frames =
      rr::datagen::build_training_set(basis, cfg.rod, rr::geom::Pose::Identity(),
                                      cfg.marker_arclengths(), count, noise,
                                      rr::datagen::mix_seed(cfg.seed, 200 + seed_offset));
  rr::io::FrameLog log;
  log.marker_s = frames.marker_s;
  log.features = frames.features;
  log.timestamps = Eigen::VectorXd::LinSpaced(count, 0.0, double(count - 1) / cfg.replay_rate_hz);
  return log;
}

std::vector<rr::rod::MeasurementSet> frames_from_log(const rr::io::FrameLog& log) {
  std::vector<rr::rod::MeasurementSet> frames;
  frames.reserve(static_cast<std::size_t>(log.features.cols()));
  for (Eigen::Index k = 0; k < log.features.cols(); ++k) {
    frames.push_back(rr::datagen::measurements_from_features(log.marker_s, log.features.col(k)));
  }
  return frames;
}

int cmd_simulate(const CommonOpts& opts, const std::string& out_path) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::StrainDataset data = rr::datagen::generate_initial_dataset(cfg.surrogate);
  rr::io::save_dataset(data, out_path);
  std::cout << "simulate ok samples=" << data.samples.size() << " grid=" << data.grid.size()
            << " out=" << out_path << "\n";
  return 0;
}

int cmd_pca(const CommonOpts& opts, const std::string& in_path, const std::string& out_path) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::StrainDataset data = rr::io::load_dataset(in_path);
  rr::reduction::PcaOptions pca_opts;
  pca_opts.inextensible = cfg.inextensible;
  const rr::reduction::BasisSet basis = rr::reduction::fit_pca(data, cfg.n_basis, pca_opts);
  rr::io::save_basis(basis, out_path, input_stamp({in_path}));
  std::cout << "pca ok n_basis=" << basis.n_basis << " inextensible=" << basis.inextensible;
  std::cout.setf(std::ios::fixed);
  std::cout.precision(6);
  for (int i = 0; i < basis.n_active_strains(); ++i) {
    std::cout << " retained" << i + 1 << "="
              << basis.strains[static_cast<std::size_t>(i)].retained_variance_fraction;
  }
  std::cout << " out=" << out_path << "\n";
  return 0;
}

int cmd_sample(const CommonOpts& opts, const std::string& basis_path, const std::string& out_path,
               const std::string& frames_out, int frames_count) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::BasisSet basis = rr::io::load_basis(basis_path);
  const rr::datagen::TrainingSet set = rr::datagen::build_training_set(
      basis, cfg.rod, rr::geom::Pose::Identity(), cfg.marker_arclengths(), cfg.training_samples,
      cfg.noise, rr::datagen::mix_seed(cfg.seed, 10));
  rr::io::save_training_set(set, basis.checksum(), out_path, input_stamp({basis_path}));
  std::cout << "sample ok k=" << set.n_samples() << " markers=" << set.n_markers()
            << " out=" << out_path;
  if (!frames_out.empty()) {
    const rr::io::FrameLog log = make_frame_log(cfg, basis, frames_count, 0);
    rr::io::save_frame_log(log, frames_out, input_stamp({basis_path}));
    std::cout << " frames=" << frames_count << " frames_out=" << frames_out;
  }
  std::cout << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path, const std::string& basis_path,
              const std::string& out_path, const std::string& report_path, int restarts) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::BasisSet basis = rr::io::load_basis(basis_path);
  std::uint64_t trained_against = 0;
  const rr::datagen::TrainingSet data = rr::io::load_training_set(data_path, &trained_against);
  if (trained_against != basis.checksum()) {
    throw rr::ChecksumMismatch("training set was generated against a different basis");
  }

  rr::net::MlpModel best_model;
  rr::net::TrainReport best_report;
  double best_val = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    rr::net::TrainConfig tc = cfg.train;
    tc.seed = rr::datagen::mix_seed(cfg.train.seed, static_cast<std::uint64_t>(r));
    auto [model, report] = rr::net::train(tc, data, basis, cfg.rod, rr::geom::Pose::Identity());
    const double val = report.val_loss[static_cast<std::size_t>(report.best_epoch)];
    if (val < best_val) {
      best_val = val;
      best_model = std::move(model);
      best_report = std::move(report);
    }
  }
  rr::net::save_model(best_model, out_path);
  if (!report_path.empty()) {
    std::ofstream rep(report_path);
    rep << "epoch,train_loss,val_loss,train_loss_norm,val_loss_norm,seconds\n";
    for (std::size_t e = 0; e < best_report.train_loss.size(); ++e) {
      rep << e + 1 << ',' << best_report.train_loss[e] << ',' << best_report.val_loss[e] << ','
          << best_report.train_loss_norm[e] << ',' << best_report.val_loss_norm[e] << ','
          << best_report.epoch_seconds[e] << "\n";
    }
  }
  std::cout << "train ok epochs=" << cfg.train.epochs << " restarts=" << restarts
            << " best_epoch=" << best_report.best_epoch + 1 << " val_loss_norm="
            << best_report.val_loss_norm[static_cast<std::size_t>(best_report.best_epoch)]
            << " out=" << out_path << "\n";
  return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& model_path, const std::string& basis_path,
              const std::string& frames_path, const std::string& out_path,
              const std::string& centerline_path, int frame_index) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::BasisSet basis = rr::io::load_basis(basis_path);
  const rr::net::MlpModel model = rr::net::load_model(model_path);
  const rr::io::FrameLog log = rr::io::load_frame_log(frames_path);
  const std::vector<rr::rod::MeasurementSet> frames = frames_from_log(log);

  std::ofstream out(out_path);
  if (!out) throw rr::IoError("cannot open for writing: " + out_path);
  out << "frame,timestamp_s,e_t,tip_x_m,tip_y_m,tip_z_m\n";
  double mean_error = 0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const rr::net::InferResult res =
        rr::net::infer(model, basis, cfg.rod, rr::geom::Pose::Identity(), frames[k]);
    const auto& tip = res.posture.back().position;
    out << k << ',' << log.timestamps(static_cast<Eigen::Index>(k)) << ',' << res.error << ','
        << tip.x() << ',' << tip.y() << ',' << tip.z() << "\n";
    mean_error += res.error;
    if (!centerline_path.empty() && static_cast<int>(k) == frame_index) {
      std::ofstream cl(centerline_path);
      cl << "s_m,x_m,y_m,z_m,d1x,d1y,d1z,d3x,d3y,d3z\n";
      for (std::size_t n = 0; n < res.posture.size(); ++n) {
        const auto& p = res.posture[n];
        cl << res.strain.grid(static_cast<Eigen::Index>(n)) << ',' << p.position.x() << ','
           << p.position.y() << ',' << p.position.z() << ',' << p.rotation(0, 0) << ','
           << p.rotation(1, 0) << ',' << p.rotation(2, 0) << ',' << p.rotation(0, 2) << ','
           << p.rotation(1, 2) << ',' << p.rotation(2, 2) << "\n";
      }
    }
  }
  mean_error /= double(frames.size());
  std::cout << "infer ok frames=" << frames.size() << " mean_e_t=" << mean_error
            << " out=" << out_path << "\n";
  return 0;
}

int cmd_benchmark(const CommonOpts& opts, const std::string& model_path,
                  const std::string& basis_path, const std::string& frames_path,
                  const std::string& out_path) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::BasisSet basis = rr::io::load_basis(basis_path);
  const rr::net::MlpModel model = rr::net::load_model(model_path);
  const rr::io::FrameLog log = rr::io::load_frame_log(frames_path);
  const std::vector<rr::rod::MeasurementSet> frames = frames_from_log(log);

  const std::vector<rr::baseline::BenchmarkRow> rows = rr::baseline::benchmark(
      frames, model, basis, cfg.rod, rr::geom::Pose::Identity(), cfg.train.eta, cfg.solver);

  std::ofstream out(out_path);
  if (!out) throw rr::IoError("cannot open for writing: " + out_path);
  out << "frame,method,seconds,norm_loss,iterations,converged\n";
  bool all_converged = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out << k << ",nn," << rows[k].nn_seconds << ',' << rows[k].nn_norm_loss << ",1,1\n";
    out << k << ",baseline," << rows[k].baseline_seconds << ',' << rows[k].baseline_norm_loss
        << ',' << rows[k].baseline_iterations << ',' << (rows[k].baseline_converged ? 1 : 0)
        << "\n";
    all_converged = all_converged && rows[k].baseline_converged;
  }
  const rr::baseline::BenchmarkSummary s = rr::baseline::summarize(rows);
  std::cout << "benchmark ok frames=" << rows.size() << " nn_median_s=" << s.nn_seconds_median
            << " baseline_median_s=" << s.baseline_seconds_median
            << " speed_ratio_median=" << s.speed_ratio_median
            << " nn_loss_median=" << s.nn_norm_loss_median
            << " baseline_loss_median=" << s.baseline_norm_loss_median << " out=" << out_path
            << "\n";
  return all_converged ? 0 : 4;
}

int cmd_replay(const CommonOpts& opts, const std::string& model_path,
               const std::string& basis_path, const std::string& frames_path,
               const std::string& out_path) {
  const PipelineConfig cfg = resolve_config(opts);
  const rr::reduction::BasisSet basis = rr::io::load_basis(basis_path);
  const rr::net::MlpModel model = rr::net::load_model(model_path);
  const rr::io::FrameLog log = rr::io::load_frame_log(frames_path);
  const std::vector<rr::rod::MeasurementSet> frames = frames_from_log(log);

  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double>(1.0 / cfg.replay_rate_hz);
  std::vector<double> latencies(frames.size(), 0.0);
  std::vector<double> errors(frames.size(), 0.0);

  const auto start = clock::now();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto due = start + std::chrono::duration_cast<clock::duration>(period * double(k));
    std::this_thread::sleep_until(due);
    const auto t0 = clock::now();
    const rr::net::InferResult res =
        rr::net::infer(model, basis, cfg.rod, rr::geom::Pose::Identity(), frames[k]);
    latencies[k] = std::chrono::duration<double>(clock::now() - t0).count();
    errors[k] = res.error;
  }

  std::ofstream out(out_path);
  if (!out) throw rr::IoError("cannot open for writing: " + out_path);
  out << "frame,timestamp_s,latency_s,e_t\n";
  for (std::size_t k = 0; k < frames.size(); ++k) {
    out << k << ',' << log.timestamps(static_cast<Eigen::Index>(k)) << ',' << latencies[k] << ','
        << errors[k] << "\n";
  }

  std::vector<double> sorted = latencies;
  std::sort(sorted.begin(), sorted.end());
  const auto pick = [&](double q) {
    return sorted[static_cast<std::size_t>(q * double(sorted.size() - 1))];
  };
  std::cout << "replay ok frames=" << frames.size() << " rate_hz=" << cfg.replay_rate_hz
            << " p50_latency_s=" << pick(0.5) << " p95_latency_s=" << pick(0.95)
            << " p99_latency_s=" << pick(0.99) << " out=" << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft continuum arm posture and strain reconstruction pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string out_path, in_path, basis_path, model_path, data_path, frames_path;
  std::string report_path, centerline_path, frames_out;
  int restarts = 1;
  int frames_count = 500;
  int frame_index = 0;

  auto* simulate = app.add_subcommand("simulate", "generate the initial strain dataset");
  add_common(simulate, opts);
  simulate->add_option("--out", out_path, "output dataset file")->required();

  auto* pca = app.add_subcommand("pca", "fit per-strain PCA basis functions");
  add_common(pca, opts);
  pca->add_option("--in", in_path, "input dataset file")->required();
  pca->add_option("--out", out_path, "output basis file")->required();

  auto* sample = app.add_subcommand("sample", "build the noisy marker training set");
  add_common(sample, opts);
  sample->add_option("--basis", basis_path, "basis file")->required();
  sample->add_option("--out", out_path, "output training set file")->required();
  sample->add_option("--frames-out", frames_out, "also emit a held-out frame log");
  sample->add_option("--frames-count", frames_count, "held-out frame count");

  auto* train = app.add_subcommand("train", "train the reconstruction network");
  add_common(train, opts);
  train->add_option("--data", data_path, "training set file")->required();
  train->add_option("--basis", basis_path, "basis file")->required();
  train->add_option("--out", out_path, "output model file")->required();
  train->add_option("--report", report_path, "per-epoch loss CSV");
  train->add_option("--restarts", restarts, "independent trainings, best model kept");

  auto* infer = app.add_subcommand("infer", "reconstruct postures for logged frames");
  add_common(infer, opts);
  infer->add_option("--model", model_path, "model file")->required();
  infer->add_option("--basis", basis_path, "basis file")->required();
  infer->add_option("--frames", frames_path, "frame log file")->required();
  infer->add_option("--out", out_path, "per-frame e_t CSV")->required();
  infer->add_option("--centerline", centerline_path, "centerline CSV for one frame");
  infer->add_option("--frame-index", frame_index, "frame used for --centerline");

  auto* benchmark = app.add_subcommand("benchmark", "NN vs direct-solver comparison table");
  add_common(benchmark, opts);
  benchmark->add_option("--model", model_path, "model file")->required();
  benchmark->add_option("--basis", basis_path, "basis file")->required();
  benchmark->add_option("--frames", frames_path, "frame log file")->required();
  benchmark->add_option("--out", out_path, "comparison CSV")->required();

  auto* replay = app.add_subcommand("replay", "paced frame replay with latency percentiles");
  add_common(replay, opts);
  replay->add_option("--model", model_path, "model file")->required();
  replay->add_option("--basis", basis_path, "basis file")->required();
  replay->add_option("--frames", frames_path, "frame log file")->required();
  replay->add_option("--out", out_path, "per-frame latency CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(opts, out_path);
    if (pca->parsed()) return cmd_pca(opts, in_path, out_path);
    if (sample->parsed()) return cmd_sample(opts, basis_path, out_path, frames_out, frames_count);
    if (train->parsed()) {
      return cmd_train(opts, data_path, basis_path, out_path, report_path, restarts);
    }
    if (infer->parsed()) {
      return cmd_infer(opts, model_path, basis_path, frames_path, out_path, centerline_path,
                       frame_index);
    }
    if (benchmark->parsed()) return cmd_benchmark(opts, model_path, basis_path, frames_path, out_path);
    if (replay->parsed()) return cmd_replay(opts, model_path, basis_path, frames_path, out_path);
  } catch (const rr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rr::FormatVersionMismatch& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const rr::ChecksumMismatch& e) {
    std::cerr << "checksum error: " << e.what() << "\n";
    return 3;
  } catch (const rr::MarkerLayoutMismatch& e) {
    std::cerr << "marker layout error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
