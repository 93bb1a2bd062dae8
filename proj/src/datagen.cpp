#include "rodrecon/datagen.hpp"

#include <cmath>
#include <random>

#include "rodrecon/errors.hpp"

namespace rodrecon::datagen {

void SurrogateConfig::validate() const {
  rod.validate();
  if (n_modes < 1) throw ConfigError("surrogate n_modes must be >= 1");
  if (amplitudes.minCoeff() < 0) throw ConfigError("surrogate amplitudes must be >= 0");
  if (n_trajectories < 1) throw ConfigError("surrogate n_trajectories must be >= 1");
  if (steps_per_trajectory < 1) throw ConfigError("surrogate steps_per_trajectory must be >= 1");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

// Legendre polynomials on [0, L0], evaluated at every grid node.
Eigen::MatrixXd mode_shapes(const Eigen::VectorXd& grid, double rod_length, int n_modes) {
  const Eigen::Index n = grid.size();
  Eigen::MatrixXd phi(n, n_modes);
  for (Eigen::Index q = 0; q < n; ++q) {
    const double x = 2.0 * grid(q) / rod_length - 1.0;
    double p0 = 1.0, p1 = x;
    for (int p = 0; p < n_modes; ++p) {
      if (p == 0) {
        phi(q, p) = 1.0;
      } else if (p == 1) {
        phi(q, p) = x;
      } else {
        const double p2 = ((2.0 * p - 1.0) * x * p1 - (p - 1.0) * p0) / p;
        p0 = p1;
        p1 = p2;
        phi(q, p) = p2;
      }
    }
  }
  return phi;
}

double envelope_value(Envelope kind, int step, int n_steps) {
  const double tau = double(step + 1) / double(n_steps);
  switch (kind) {
    case Envelope::Ramp:
      return tau;
    case Envelope::Sinusoid:
      return std::sin(M_PI * double(step + 1) / double(n_steps + 1));
  }
  return tau;
}

}  // namespace

reduction::StrainDataset generate_initial_dataset(const SurrogateConfig& cfg) {
  cfg.validate();
  reduction::StrainDataset data;
  data.grid = rod::uniform_grid(cfg.rod.rest_length, cfg.rod.n_nodes);
  const Eigen::MatrixXd phi = mode_shapes(data.grid, cfg.rod.rest_length, cfg.n_modes);
  const Strain6 rest = cfg.rod.rest_strain.as_vector();

  data.samples.reserve(static_cast<size_t>(cfg.n_trajectories * cfg.steps_per_trajectory));
  for (int t = 0; t < cfg.n_trajectories; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::Matrix<double, 6, Eigen::Dynamic> coef(6, cfg.n_modes);
    for (int i = 0; i < 6; ++i) {
      for (int p = 0; p < cfg.n_modes; ++p) coef(i, p) = cfg.amplitudes(i) * unit(rng);
    }
    const Eigen::MatrixXd shape = coef * phi.transpose();  // 6 x n_nodes
    for (int step = 0; step < cfg.steps_per_trajectory; ++step) {
      const double env = envelope_value(cfg.envelope, step, cfg.steps_per_trajectory);
      rod::StrainMatrix sample = env * shape;
      sample.colwise() += rest;
      sample.row(5) = sample.row(5).cwiseMax(0.1);  // keep stretch physical
      data.samples.push_back(std::move(sample));
    }
  }
  return data;
}

Eigen::Matrix<double, 9, 1> marker_features(const Pose& pose) {
  Eigen::Matrix<double, 9, 1> f;
  f << pose.position, pose.rotation.col(0), pose.rotation.col(2);
  return f;
}

Pose pose_from_features(const Eigen::Matrix<double, 9, 1>& f) {
  Pose p;
  p.position = f.head<3>();
  const Vec3 d1 = f.segment<3>(3);
  const Vec3 d3 = f.tail<3>();
  p.rotation.col(0) = d1;
  p.rotation.col(1) = d3.cross(d1);
  p.rotation.col(2) = d3;
  return p;
}

rod::MeasurementSet measurements_from_features(const Eigen::VectorXd& marker_s,
                                               const Eigen::VectorXd& feature_column) {
  if (feature_column.size() != 9 * marker_s.size()) {
    throw LengthMismatch("feature column length must be 9 * N_m");
  }
  rod::MeasurementSet meas;
  meas.markers.resize(static_cast<size_t>(marker_s.size()));
  for (Eigen::Index m = 0; m < marker_s.size(); ++m) {
    meas.markers[static_cast<size_t>(m)].s = marker_s(m);
    meas.markers[static_cast<size_t>(m)].pose =
        pose_from_features(feature_column.segment<9>(9 * m));
  }
  return meas;
}

TrainingSet build_training_set(const reduction::BasisSet& basis, const rod::RodProperties& rod_props,
                               const Pose& base, const Eigen::VectorXd& marker_s, int count,
                               const NoiseModel& noise, std::uint64_t seed) {
  if (count < 1) throw ConfigError("training set size must be >= 1");
  rod::MeasurementSet layout;
  for (Eigen::Index m = 0; m < marker_s.size(); ++m) {
    layout.markers.push_back({marker_s(m), Pose::Identity()});
  }
  layout.validate(rod_props.rest_length);
  if (noise.sigma_position < 0 || noise.sigma_angle < 0) {
    throw ConfigError("noise sigmas must be >= 0");
  }

  TrainingSet set;
  set.marker_s = marker_s;
  set.truth_coeffs = reduction::sample_coefficients(basis, count, seed);
  set.features.resize(9 * marker_s.size(), count);

  for (int k = 0; k < count; ++k) {
    const rod::StrainField field = reduction::synthesize_strain(basis, set.truth_coeffs.col(k));
    const std::vector<Pose> poses = rod::integrate_kinematics(field, base);
    std::mt19937_64 rng(mix_seed(noise.seed, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index m = 0; m < marker_s.size(); ++m) {
      Pose p = rod::interpolate_pose(poses, field, marker_s(m));
      if (noise.sigma_position > 0 || noise.sigma_angle > 0) {
        Vec3 dx, dtheta;
        for (int a = 0; a < 3; ++a) dx(a) = noise.sigma_position * unit(rng);
        for (int a = 0; a < 3; ++a) dtheta(a) = noise.sigma_angle * unit(rng);
        p.position += dx;
        p.rotation = geom::exp_so3(dtheta, 1.0) * p.rotation;  // lab-frame error
      }
      set.features.col(k).segment<9>(9 * m) = marker_features(p);
    }
  }
  return set;
}

}  // namespace rodrecon::datagen
