#include "rodrecon/config.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "rodrecon/errors.hpp"

namespace rodrecon::cli {

using nlohmann::json;

Eigen::VectorXd PipelineConfig::marker_arclengths() const {
  Eigen::VectorXd s(n_markers);
  for (int m = 0; m < n_markers; ++m) {
    s(m) = rod.rest_length * double(m + 1) / double(n_markers);
  }
  return s;
}

void PipelineConfig::validate() const {
  rod.validate();
  surrogate.validate();
  train.validate();
  solver.validate();
  if (n_basis < 1) throw ConfigError("pca_n_basis must be >= 1");
  if (n_markers < 1) throw ConfigError("n_markers must be >= 1");
  if (training_samples < 2) throw ConfigError("train_samples must be >= 2");
  if (replay_rate_hz < 1) throw ConfigError("replay_rate_hz must be >= 1");
  if (noise.sigma_position < 0 || noise.sigma_angle < 0) {
    throw ConfigError("noise sigmas must be >= 0");
  }
}

void PipelineConfig::finalize() {
  surrogate.rod = rod;
  surrogate.seed = datagen::mix_seed(seed, 1);
  noise.seed = datagen::mix_seed(seed, 2);
  train.seed = datagen::mix_seed(seed, 3);
  validate();
}

PipelineConfig preset_octopus() {
  PipelineConfig cfg;
  cfg.rod.rest_length = 0.2;
  cfg.rod.n_nodes = 100;
  cfg.surrogate.n_modes = 4;
  cfg.surrogate.amplitudes << 5.0, 5.0, 2.0, 0.02, 0.02, 0.05;
  cfg.surrogate.n_trajectories = 27;
  cfg.surrogate.steps_per_trajectory = 50;
  cfg.n_basis = 4;
  cfg.inextensible = false;
  cfg.n_markers = 8;
  cfg.noise.sigma_position = 1e-3 * cfg.rod.rest_length;
  cfg.noise.sigma_angle = 0.5 * M_PI / 180.0;
  cfg.train.hidden1 = 128;
  cfg.train.hidden2 = 64;
  cfg.training_samples = 100000;
  cfg.finalize();
  return cfg;
}

PipelineConfig preset_br2() {
  PipelineConfig cfg;
  cfg.rod.rest_length = 0.3;
  cfg.rod.n_nodes = 100;
  cfg.rod.stiffness_angular.setConstant(0.01);  // soft silicone arm
  cfg.surrogate.n_modes = 3;
  cfg.surrogate.amplitudes << 1.0, 1.0, 0.75, 0.0, 0.0, 0.0;  // inextensible, unshearable
  cfg.surrogate.n_trajectories = 27;
  cfg.surrogate.steps_per_trajectory = 50;
  cfg.n_basis = 3;
  cfg.inextensible = true;
  cfg.n_markers = 3;
  cfg.noise.sigma_position = 1e-3 * cfg.rod.rest_length;
  cfg.noise.sigma_angle = 0.1 * M_PI / 180.0;
  cfg.train.hidden1 = 32;
  cfg.train.hidden2 = 16;
  cfg.training_samples = 8960;
  cfg.finalize();
  return cfg;
}

PipelineConfig preset_by_name(const std::string& name) {
  if (name == "octopus") return preset_octopus();
  if (name == "br2") return preset_br2();
  throw ConfigError("unknown preset '" + name + "' (expected octopus or br2)");
}

namespace {

json to_json(const PipelineConfig& cfg) {
  json j;
  j["rod_length_m"] = cfg.rod.rest_length;
  j["rod_n_nodes"] = cfg.rod.n_nodes;
  j["stiffness_kappa1_nm2"] = cfg.rod.stiffness_angular(0);
  j["stiffness_kappa2_nm2"] = cfg.rod.stiffness_angular(1);
  j["stiffness_kappa3_nm2"] = cfg.rod.stiffness_angular(2);
  j["stiffness_nu1_n"] = cfg.rod.stiffness_linear(0);
  j["stiffness_nu2_n"] = cfg.rod.stiffness_linear(1);
  j["stiffness_nu3_n"] = cfg.rod.stiffness_linear(2);
  j["surrogate_n_modes"] = cfg.surrogate.n_modes;
  j["surrogate_amp_kappa1_rad_per_m"] = cfg.surrogate.amplitudes(0);
  j["surrogate_amp_kappa2_rad_per_m"] = cfg.surrogate.amplitudes(1);
  j["surrogate_amp_kappa3_rad_per_m"] = cfg.surrogate.amplitudes(2);
  j["surrogate_amp_nu1"] = cfg.surrogate.amplitudes(3);
  j["surrogate_amp_nu2"] = cfg.surrogate.amplitudes(4);
  j["surrogate_amp_nu3"] = cfg.surrogate.amplitudes(5);
  j["surrogate_n_trajectories"] = cfg.surrogate.n_trajectories;
  j["surrogate_steps_per_trajectory"] = cfg.surrogate.steps_per_trajectory;
  j["surrogate_envelope"] = cfg.surrogate.envelope == datagen::Envelope::Ramp ? "ramp" : "sinusoid";
  j["pca_n_basis"] = cfg.n_basis;
  j["pca_inextensible"] = cfg.inextensible;
  j["n_markers"] = cfg.n_markers;
  j["noise_sigma_position_m"] = cfg.noise.sigma_position;
  j["noise_sigma_angle_rad"] = cfg.noise.sigma_angle;
  j["train_eta"] = cfg.train.eta;
  j["train_learning_rate"] = cfg.train.learning_rate;
  j["train_batch_size"] = cfg.train.batch_size;
  j["train_epochs"] = cfg.train.epochs;
  j["train_val_fraction"] = cfg.train.val_fraction;
  j["train_hidden1"] = cfg.train.hidden1;
  j["train_hidden2"] = cfg.train.hidden2;
  j["train_samples"] = cfg.training_samples;
  j["solver_max_iters"] = cfg.solver.max_iters;
  j["solver_step_rule"] = cfg.solver.step_rule == baseline::StepRule::Fixed ? "fixed" : "armijo";
  j["solver_initial_step"] = cfg.solver.initial_step;
  j["solver_grad_tolerance"] = cfg.solver.grad_tolerance;
  j["replay_rate_hz"] = cfg.replay_rate_hz;
  j["seed"] = cfg.seed;
  return j;
}

template <typename T>
void read_key(const json& j, const std::string& key, T& out) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void apply_json(const json& j, PipelineConfig& cfg) {
  const json defaults = to_json(cfg);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    (void)value;
  }
  if (j.contains("rod_length_m")) read_key(j, "rod_length_m", cfg.rod.rest_length);
  if (j.contains("rod_n_nodes")) read_key(j, "rod_n_nodes", cfg.rod.n_nodes);
  const char* stiff_keys[6] = {"stiffness_kappa1_nm2", "stiffness_kappa2_nm2",
                               "stiffness_kappa3_nm2", "stiffness_nu1_n",
                               "stiffness_nu2_n",      "stiffness_nu3_n"};
  for (int i = 0; i < 6; ++i) {
    if (!j.contains(stiff_keys[i])) continue;
    double v = 0;
    read_key(j, stiff_keys[i], v);
    if (i < 3) {
      cfg.rod.stiffness_angular(i) = v;
    } else {
      cfg.rod.stiffness_linear(i - 3) = v;
    }
  }
  if (j.contains("surrogate_n_modes")) read_key(j, "surrogate_n_modes", cfg.surrogate.n_modes);
  const char* amp_keys[6] = {"surrogate_amp_kappa1_rad_per_m", "surrogate_amp_kappa2_rad_per_m",
                             "surrogate_amp_kappa3_rad_per_m", "surrogate_amp_nu1",
                             "surrogate_amp_nu2",              "surrogate_amp_nu3"};
  for (int i = 0; i < 6; ++i) {
    if (!j.contains(amp_keys[i])) continue;
    double v = 0;
    read_key(j, amp_keys[i], v);
    cfg.surrogate.amplitudes(i) = v;
  }
  if (j.contains("surrogate_n_trajectories")) {
    read_key(j, "surrogate_n_trajectories", cfg.surrogate.n_trajectories);
  }
  if (j.contains("surrogate_steps_per_trajectory")) {
    read_key(j, "surrogate_steps_per_trajectory", cfg.surrogate.steps_per_trajectory);
  }
  if (j.contains("surrogate_envelope")) {
    std::string kind;
    read_key(j, "surrogate_envelope", kind);
    if (kind == "ramp") {
      cfg.surrogate.envelope = datagen::Envelope::Ramp;
    } else if (kind == "sinusoid") {
      cfg.surrogate.envelope = datagen::Envelope::Sinusoid;
    } else {
      throw ConfigError("surrogate_envelope must be 'ramp' or 'sinusoid'");
    }
  }
  if (j.contains("pca_n_basis")) read_key(j, "pca_n_basis", cfg.n_basis);
  if (j.contains("pca_inextensible")) read_key(j, "pca_inextensible", cfg.inextensible);
  if (j.contains("n_markers")) read_key(j, "n_markers", cfg.n_markers);
  if (j.contains("noise_sigma_position_m")) {
    read_key(j, "noise_sigma_position_m", cfg.noise.sigma_position);
  }
  if (j.contains("noise_sigma_angle_rad")) {
    read_key(j, "noise_sigma_angle_rad", cfg.noise.sigma_angle);
  }
  if (j.contains("train_eta")) read_key(j, "train_eta", cfg.train.eta);
  if (j.contains("train_learning_rate")) read_key(j, "train_learning_rate", cfg.train.learning_rate);
  if (j.contains("train_batch_size")) read_key(j, "train_batch_size", cfg.train.batch_size);
  if (j.contains("train_epochs")) read_key(j, "train_epochs", cfg.train.epochs);
  if (j.contains("train_val_fraction")) read_key(j, "train_val_fraction", cfg.train.val_fraction);
  if (j.contains("train_hidden1")) read_key(j, "train_hidden1", cfg.train.hidden1);
  if (j.contains("train_hidden2")) read_key(j, "train_hidden2", cfg.train.hidden2);
  if (j.contains("train_samples")) read_key(j, "train_samples", cfg.training_samples);
  if (j.contains("solver_max_iters")) read_key(j, "solver_max_iters", cfg.solver.max_iters);
  if (j.contains("solver_step_rule")) {
    std::string rule;
    read_key(j, "solver_step_rule", rule);
    if (rule == "fixed") {
      cfg.solver.step_rule = baseline::StepRule::Fixed;
    } else if (rule == "armijo") {
      cfg.solver.step_rule = baseline::StepRule::Armijo;
    } else {
      throw ConfigError("solver_step_rule must be 'fixed' or 'armijo'");
    }
  }
  if (j.contains("solver_initial_step")) read_key(j, "solver_initial_step", cfg.solver.initial_step);
  if (j.contains("solver_grad_tolerance")) {
    read_key(j, "solver_grad_tolerance", cfg.solver.grad_tolerance);
  }
  if (j.contains("replay_rate_hz")) read_key(j, "replay_rate_hz", cfg.replay_rate_hz);
  if (j.contains("seed")) read_key(j, "seed", cfg.seed);
}

}  // namespace

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << to_json(cfg).dump(2) << '\n';
}

PipelineConfig load_config(const std::string& path, const PipelineConfig& base_preset) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  PipelineConfig cfg = base_preset;
  apply_json(j, cfg);
  cfg.finalize();
  return cfg;
}

}  // namespace rodrecon::cli
