#ifndef RODRECON_BASELINE_HPP
#define RODRECON_BASELINE_HPP

#include <vector>

#include "rodrecon/net.hpp"
#include "rodrecon/rod.hpp"

namespace rodrecon::baseline {

using rod::Pose;

enum class StepRule { Fixed, Armijo };

struct SolverConfig {
  int max_iters = 10000;
  StepRule step_rule = StepRule::Armijo;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double initial_step = 1e-3;
  double grad_tolerance = 1e-8;

  void validate() const;
};

struct SolveResult {
  rod::StrainField strain;
  std::vector<Pose> posture;
  double objective = 0;
  double gradient_norm = 0;
  int iterations = 0;
  double seconds = 0;
  bool converged = false;
};

/// Gradient descent on the full discretized strain grid, minimizing the
/// same objective the network is trained on. Warm start optional; defaults
/// to the rest field.
SolveResult solve(const rod::MeasurementSet& meas, const Pose& base,
                  const rod::RodProperties& props, double eta, const SolverConfig& cfg,
                  const rod::StrainField* warm_start = nullptr);

struct BenchmarkRow {
  double nn_seconds = 0;
  double nn_norm_loss = 0;
  double baseline_seconds = 0;
  double baseline_norm_loss = 0;
  int baseline_iterations = 0;
  bool baseline_converged = false;
};

struct BenchmarkSummary {
  double nn_seconds_median = 0, nn_seconds_p95 = 0;
  double baseline_seconds_median = 0, baseline_seconds_p95 = 0;
  double speed_ratio_median = 0;  // baseline time / NN time
  double nn_norm_loss_median = 0, baseline_norm_loss_median = 0;
};

std::vector<BenchmarkRow> benchmark(const std::vector<rod::MeasurementSet>& frames,
                                    const net::MlpModel& model, const reduction::BasisSet& basis,
                                    const rod::RodProperties& props, const Pose& base, double eta,
                                    const SolverConfig& cfg);

BenchmarkSummary summarize(const std::vector<BenchmarkRow>& rows);

}  // namespace rodrecon::baseline

#endif
