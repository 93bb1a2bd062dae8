#include "rodrecon/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rodrecon/errors.hpp"

namespace rodrecon::baseline {

void SolverConfig::validate() const {
  if (max_iters < 1) throw ConfigError("solver max_iters must be >= 1");
  if (!(initial_step > 0) || !(grad_tolerance > 0)) {
    throw ConfigError("solver step and tolerance must be > 0");
  }
  if (!(armijo_c > 0 && armijo_c < 1) || !(armijo_shrink > 0 && armijo_shrink < 1)) {
    throw ConfigError("Armijo parameters must lie in (0,1)");
  }
}

SolveResult solve(const rod::MeasurementSet& meas, const Pose& base,
                  const rod::RodProperties& props, double eta, const SolverConfig& cfg,
                  const rod::StrainField* warm_start) {
  cfg.validate();
  meas.validate(props.rest_length);
  const auto t0 = std::chrono::steady_clock::now();

  rod::StrainField field = warm_start ? *warm_start : rod::rest_field(props);
  rod::StrainMatrix grad;
  double value = rod::objective_with_gradient(field, base, meas, props, eta, grad);

  rod::StrainField best_field = field;
  double best_value = value;

  double step = cfg.initial_step;
  int iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iters; ++iter) {
    const double grad_sq = grad.squaredNorm();
    if (std::sqrt(grad_sq) <= cfg.grad_tolerance) {
      converged = true;
      break;
    }

    if (cfg.step_rule == StepRule::Fixed) {
      field.values -= cfg.initial_step * grad;
      value = rod::objective_with_gradient(field, base, meas, props, eta, grad);
    } else {
      // backtracking from twice the last accepted step
      double trial = std::min(step * 2.0, 1.0);
      rod::StrainField candidate = field;
      bool accepted = false;
      while (trial > 1e-16) {
        candidate.values = field.values - trial * grad;
        const double cand_value = rod::objective(candidate, base, meas, props, eta);
        if (cand_value <= value - cfg.armijo_c * trial * grad_sq) {
          accepted = true;
          break;
        }
        trial *= cfg.armijo_shrink;
      }
      if (!accepted) break;  // no descent step found at machine scale
      step = trial;
      field = candidate;
      value = rod::objective_with_gradient(field, base, meas, props, eta, grad);
    }
    if (value < best_value) {
      best_value = value;
      best_field = field;
    }
  }

  SolveResult result;
  result.strain = best_field;
  result.posture = rod::integrate_kinematics(best_field, base);
  result.objective = best_value;
  result.gradient_norm = grad.norm();
  result.iterations = iter;
  result.converged = converged;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<BenchmarkRow> benchmark(const std::vector<rod::MeasurementSet>& frames,
                                    const net::MlpModel& model, const reduction::BasisSet& basis,
                                    const rod::RodProperties& props, const Pose& base, double eta,
                                    const SolverConfig& cfg) {
  std::vector<BenchmarkRow> rows;
  rows.reserve(frames.size());
  for (const auto& frame : frames) {
    BenchmarkRow row;
    const double norm = 1.0 / (eta * double(frame.markers.size()));

    const auto t0 = std::chrono::steady_clock::now();
    const net::InferResult nn = net::infer(model, basis, props, base, frame);
    row.nn_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.nn_norm_loss = rod::objective(nn.strain, base, frame, props, eta) * norm;

    const SolveResult fb = solve(frame, base, props, eta, cfg);
    row.baseline_seconds = fb.seconds;
    row.baseline_norm_loss = fb.objective * norm;
    row.baseline_iterations = fb.iterations;
    row.baseline_converged = fb.converged;
    rows.push_back(row);
  }
  return rows;
}

namespace {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] * (1 - frac) + values[hi] * frac;
}

}  // namespace

BenchmarkSummary summarize(const std::vector<BenchmarkRow>& rows) {
  BenchmarkSummary s;
  if (rows.empty()) return s;
  std::vector<double> nn_t, fb_t, ratio, nn_l, fb_l;
  for (const auto& r : rows) {
    nn_t.push_back(r.nn_seconds);
    fb_t.push_back(r.baseline_seconds);
    ratio.push_back(r.nn_seconds > 0 ? r.baseline_seconds / r.nn_seconds : 0);
    nn_l.push_back(r.nn_norm_loss);
    fb_l.push_back(r.baseline_norm_loss);
  }
  s.nn_seconds_median = percentile(nn_t, 0.5);
  s.nn_seconds_p95 = percentile(nn_t, 0.95);
  s.baseline_seconds_median = percentile(fb_t, 0.5);
  s.baseline_seconds_p95 = percentile(fb_t, 0.95);
  s.speed_ratio_median = percentile(ratio, 0.5);
  s.nn_norm_loss_median = percentile(nn_l, 0.5);
  s.baseline_norm_loss_median = percentile(fb_l, 0.5);
  return s;
}

}  // namespace rodrecon::baseline
