#ifndef RODRECON_NET_HPP
#define RODRECON_NET_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rodrecon/datagen.hpp"
#include "rodrecon/reduction.hpp"
#include "rodrecon/rod.hpp"

namespace rodrecon::net {

using rod::Pose;

/// Two-hidden-layer SiLU MLP from marker features to strain coefficients.
/// Marker positions are divided by position_scale on input; raw outputs are
/// in standardized units and mapped to coefficients via out_mean/out_scale.
struct MlpModel {
  std::vector<int> layer_sizes;  // [9*N_m, h1, h2, coeff_dim]
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd out_mean;
  Eigen::VectorXd out_scale;
  Eigen::VectorXd marker_s;  // training marker layout, checked at inference
  double position_scale = 1.0;
  std::uint64_t basis_checksum = 0;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;
  void validate() const;
};

struct TrainConfig {
  double eta = 1e4;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 100;
  double val_fraction = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden1 = 128;
  int hidden2 = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;       // raw, per epoch
  std::vector<double> val_loss;         // raw, per epoch
  std::vector<double> train_loss_norm;  // divided by eta * N_m
  std::vector<double> val_loss_norm;
  std::vector<double> epoch_seconds;
  int best_epoch = 0;  // zero-based index of minimum validation loss
};

struct InferResult {
  Eigen::VectorXd coeffs;
  rod::StrainField strain;
  std::vector<Pose> posture;
  double error = 0;  // mismatch cost per marker, Phi / N_m
};

/// Glorot-uniform weights, zero biases; output statistics and the basis
/// checksum are taken from the basis the model will be trained against.
MlpModel init_model(int n_markers, int hidden1, int hidden2,
                    const reduction::BasisSet& basis, double position_scale,
                    std::uint64_t seed);

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& features);

double silu(double x);

/// Mean physics-informed objective over the given sample columns.
double loss(const MlpModel& model, const Eigen::MatrixXd& features,
            const std::vector<int>& sample_indices, const reduction::BasisSet& basis,
            const rod::RodProperties& props, const Pose& base,
            const Eigen::VectorXd& marker_s, double eta);

struct ParameterGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

double loss_gradient(const MlpModel& model, const Eigen::MatrixXd& features,
                     const std::vector<int>& sample_indices, const reduction::BasisSet& basis,
                     const rod::RodProperties& props, const Pose& base,
                     const Eigen::VectorXd& marker_s, double eta, ParameterGradients& grads);

/// 80/20 split indices derived only from (seed, sample count).
void split_indices(int n_samples, double val_fraction, std::uint64_t seed,
                   std::vector<int>& train, std::vector<int>& val);

std::pair<MlpModel, TrainReport> train(const TrainConfig& config,
                                       const datagen::TrainingSet& data,
                                       const reduction::BasisSet& basis,
                                       const rod::RodProperties& props, const Pose& base);

InferResult infer(const MlpModel& model, const reduction::BasisSet& basis,
                  const rod::RodProperties& props, const Pose& base,
                  const rod::MeasurementSet& meas);

void check_basis(const MlpModel& model, const reduction::BasisSet& basis);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace rodrecon::net

#endif
