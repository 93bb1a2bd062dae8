#ifndef RODRECON_DATAGEN_HPP
#define RODRECON_DATAGEN_HPP

#include <Eigen/Core>
#include <cstdint>

#include "rodrecon/reduction.hpp"
#include "rodrecon/rod.hpp"

namespace rodrecon::datagen {

using rod::Pose;
using rod::Strain6;
using rod::Vec3;

enum class Envelope { Ramp, Sinusoid };

/// Stand-in for the dynamic simulators: random smooth polynomial strain
/// modes with a temporal envelope per trajectory.
struct SurrogateConfig {
  rod::RodProperties rod;
  int n_modes = 3;
  Strain6 amplitudes = (Strain6() << 5.0, 5.0, 2.0, 0.02, 0.02, 0.05).finished();
  int n_trajectories = 27;
  int steps_per_trajectory = 50;
  Envelope envelope = Envelope::Sinusoid;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseModel {
  double sigma_position = 0;  // meters, per axis
  double sigma_angle = 0;     // radians, per axis
  std::uint64_t seed = 0;
};

/// Noisy marker features per sample; ground-truth coefficients ride along
/// for diagnostics only and are never read by the loss.
struct TrainingSet {
  Eigen::VectorXd marker_s;
  Eigen::MatrixXd features;      // (9*N_m) x K, column per sample
  Eigen::MatrixXd truth_coeffs;  // coeff_dim x K

  Eigen::Index n_markers() const { return marker_s.size(); }
  Eigen::Index n_samples() const { return features.cols(); }
};

reduction::StrainDataset generate_initial_dataset(const SurrogateConfig& cfg);

/// [x, d1, d3]; d2 recoverable as d3 x d1.
Eigen::Matrix<double, 9, 1> marker_features(const Pose& pose);

/// Inverse of marker_features without re-orthonormalization.
Pose pose_from_features(const Eigen::Matrix<double, 9, 1>& f);

rod::MeasurementSet measurements_from_features(const Eigen::VectorXd& marker_s,
                                               const Eigen::VectorXd& feature_column);

TrainingSet build_training_set(const reduction::BasisSet& basis, const rod::RodProperties& rod,
                               const Pose& base, const Eigen::VectorXd& marker_s, int count,
                               const NoiseModel& noise, std::uint64_t seed);

/// splitmix64 mix of a seed and a counter; used to derive independent
/// per-sample random streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter);

}  // namespace rodrecon::datagen

#endif
