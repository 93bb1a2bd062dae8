#ifndef RODRECON_CONFIG_HPP
#define RODRECON_CONFIG_HPP

#include <string>

#include "rodrecon/baseline.hpp"
#include "rodrecon/datagen.hpp"
#include "rodrecon/net.hpp"

namespace rodrecon::cli {

/// Everything one end-to-end run needs, with the two testbed presets as
/// starting points. Stored on disk as a flat JSON document whose keys carry
/// explicit units.
struct PipelineConfig {
  rod::RodProperties rod;
  datagen::SurrogateConfig surrogate;
  int n_basis = 4;
  bool inextensible = false;
  int n_markers = 8;  // evenly spaced: s_m = m * L0 / N_m
  datagen::NoiseModel noise;
  net::TrainConfig train;
  baseline::SolverConfig solver;
  int training_samples = 100000;
  int replay_rate_hz = 100;
  std::uint64_t seed = 0;

  Eigen::VectorXd marker_arclengths() const;
  void validate() const;
  /// propagates the master seed and shared rod properties to subconfigs
  void finalize();
};

PipelineConfig preset_octopus();
PipelineConfig preset_br2();
PipelineConfig preset_by_name(const std::string& name);

void save_config(const PipelineConfig& cfg, const std::string& path);
/// Applies the flat key-value overrides in `path` on top of `base_preset`.
PipelineConfig load_config(const std::string& path, const PipelineConfig& base_preset);

}  // namespace rodrecon::cli

#endif
