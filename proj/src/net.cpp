#include "rodrecon/net.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rodrecon/errors.hpp"
#include "rodrecon/io.hpp"

namespace rodrecon::net {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double silu_prime(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

struct ForwardCache {
  Eigen::VectorXd a0, z1, a1, z2, a2, z3;
};

Eigen::VectorXd scale_input(const MlpModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.input_dim()) {
    throw ShapeMismatch("feature length does not match model input layer");
  }
  Eigen::VectorXd in = features;
  for (Eigen::Index m = 0; m + 8 < in.size(); m += 9) {
    in.segment<3>(m) /= model.position_scale;
  }
  return in;
}

void forward_cached(const MlpModel& model, const Eigen::VectorXd& features, ForwardCache& c) {
  c.a0 = scale_input(model, features);
  c.z1 = model.weights[0] * c.a0 + model.biases[0];
  c.a1 = c.z1.unaryExpr([](double x) { return silu(x); });
  c.z2 = model.weights[1] * c.a1 + model.biases[1];
  c.a2 = c.z2.unaryExpr([](double x) { return silu(x); });
  c.z3 = model.weights[2] * c.a2 + model.biases[2];
}

Eigen::VectorXd coefficients_from_output(const MlpModel& model, const Eigen::VectorXd& z3) {
  return model.out_mean + model.out_scale.cwiseProduct(z3);
}

// dJ/dalpha from dJ/dstrain via basis linearity
Eigen::VectorXd chain_strain_to_coeffs(const reduction::BasisSet& basis,
                                       const rod::StrainMatrix& strain_grad) {
  Eigen::VectorXd g(basis.coeff_dim());
  for (int i = 0; i < basis.n_active_strains(); ++i) {
    const auto& sb = basis.strains[static_cast<std::size_t>(i)];
    g.segment(i * basis.n_basis, basis.n_basis) =
        sb.basis_fns.transpose() * strain_grad.row(i).transpose();
  }
  return g;
}

}  // namespace

double silu(double x) { return x * sigmoid(x); }

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

void MlpModel::validate() const {
  if (layer_sizes.size() != 4) throw ShapeMismatch("model must have exactly two hidden layers");
  if (weights.size() != 3 || biases.size() != 3) throw ShapeMismatch("model needs 3 weight layers");
  for (int l = 0; l < 3; ++l) {
    if (weights[static_cast<std::size_t>(l)].rows() != layer_sizes[static_cast<std::size_t>(l) + 1] ||
        weights[static_cast<std::size_t>(l)].cols() != layer_sizes[static_cast<std::size_t>(l)] ||
        biases[static_cast<std::size_t>(l)].size() != layer_sizes[static_cast<std::size_t>(l) + 1]) {
      throw ShapeMismatch("inconsistent layer shapes");
    }
    if (!weights[static_cast<std::size_t>(l)].allFinite() ||
        !biases[static_cast<std::size_t>(l)].allFinite()) {
      throw ShapeMismatch("non-finite model parameters");
    }
  }
  if (out_mean.size() != layer_sizes[3] || out_scale.size() != layer_sizes[3]) {
    throw ShapeMismatch("output statistics length mismatch");
  }
}

void TrainConfig::validate() const {
  if (!(eta > 0) || !(learning_rate > 0)) throw ConfigError("eta and learning_rate must be > 0");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must be in (0,1)");
  if (batch_size < 1 || epochs < 1) throw ConfigError("batch_size and epochs must be >= 1");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden sizes must be >= 1");
}

MlpModel init_model(int n_markers, int hidden1, int hidden2, const reduction::BasisSet& basis,
                    double position_scale, std::uint64_t seed) {
  MlpModel model;
  model.layer_sizes = {9 * n_markers, hidden1, hidden2, basis.coeff_dim()};
  model.position_scale = position_scale;
  model.basis_checksum = basis.checksum();

  std::mt19937_64 rng(seed);
  for (int l = 0; l < 3; ++l) {
    const int fan_in = model.layer_sizes[static_cast<std::size_t>(l)];
    const int fan_out = model.layer_sizes[static_cast<std::size_t>(l) + 1];
    const double r = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-r, r);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform(rng);
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }

  model.out_mean.resize(basis.coeff_dim());
  model.out_scale.resize(basis.coeff_dim());
  for (int i = 0; i < basis.n_active_strains(); ++i) {
    const auto& sb = basis.strains[static_cast<std::size_t>(i)];
    for (int j = 0; j < basis.n_basis; ++j) {
      model.out_mean(i * basis.n_basis + j) = sb.coeff_mean(j);
      model.out_scale(i * basis.n_basis + j) = sb.coeff_std(j);
    }
  }
  model.validate();
  return model;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& features) {
  ForwardCache c;
  forward_cached(model, features, c);
  return coefficients_from_output(model, c.z3);
}

double loss(const MlpModel& model, const Eigen::MatrixXd& features,
            const std::vector<int>& sample_indices, const reduction::BasisSet& basis,
            const rod::RodProperties& props, const Pose& base, const Eigen::VectorXd& marker_s,
            double eta) {
  check_basis(model, basis);
  double total = 0;
  for (int k : sample_indices) {
    const Eigen::VectorXd alpha = forward(model, features.col(k));
    const rod::StrainField field = reduction::synthesize_strain(basis, alpha);
    const rod::MeasurementSet meas =
        datagen::measurements_from_features(marker_s, features.col(k));
    total += rod::objective(field, base, meas, props, eta);
  }
  return total / double(sample_indices.size());
}

double loss_gradient(const MlpModel& model, const Eigen::MatrixXd& features,
                     const std::vector<int>& sample_indices, const reduction::BasisSet& basis,
                     const rod::RodProperties& props, const Pose& base,
                     const Eigen::VectorXd& marker_s, double eta, ParameterGradients& grads) {
  check_basis(model, basis);
  grads.weights.assign(3, Eigen::MatrixXd());
  grads.biases.assign(3, Eigen::VectorXd());
  for (int l = 0; l < 3; ++l) {
    grads.weights[static_cast<std::size_t>(l)].setZero(model.weights[static_cast<std::size_t>(l)].rows(),
                                                       model.weights[static_cast<std::size_t>(l)].cols());
    grads.biases[static_cast<std::size_t>(l)].setZero(model.biases[static_cast<std::size_t>(l)].size());
  }

  const double inv_batch = 1.0 / double(sample_indices.size());
  double total = 0;
  ForwardCache c;
  rod::StrainMatrix strain_grad;
  for (int k : sample_indices) {
    forward_cached(model, features.col(k), c);
    const Eigen::VectorXd alpha = coefficients_from_output(model, c.z3);
    const rod::StrainField field = reduction::synthesize_strain(basis, alpha);
    const rod::MeasurementSet meas =
        datagen::measurements_from_features(marker_s, features.col(k));
    total += rod::objective_with_gradient(field, base, meas, props, eta, strain_grad);

    const Eigen::VectorXd dalpha = chain_strain_to_coeffs(basis, strain_grad);
    const Eigen::VectorXd dz3 = model.out_scale.cwiseProduct(dalpha) * inv_batch;

    grads.weights[2].noalias() += dz3 * c.a2.transpose();
    grads.biases[2] += dz3;
    const Eigen::VectorXd da2 = model.weights[2].transpose() * dz3;
    const Eigen::VectorXd dz2 =
        da2.cwiseProduct(c.z2.unaryExpr([](double x) { return silu_prime(x); }));
    grads.weights[1].noalias() += dz2 * c.a1.transpose();
    grads.biases[1] += dz2;
    const Eigen::VectorXd da1 = model.weights[1].transpose() * dz2;
    const Eigen::VectorXd dz1 =
        da1.cwiseProduct(c.z1.unaryExpr([](double x) { return silu_prime(x); }));
    grads.weights[0].noalias() += dz1 * c.a0.transpose();
    grads.biases[0] += dz1;
  }
  return total * inv_batch;
}

void split_indices(int n_samples, double val_fraction, std::uint64_t seed,
                   std::vector<int>& train, std::vector<int>& val) {
  std::vector<int> all(static_cast<std::size_t>(n_samples));
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(datagen::mix_seed(seed, 0x73706c6974ull));  // stream tag "split"
  std::shuffle(all.begin(), all.end(), rng);
  const int n_val = std::max(1, static_cast<int>(std::lround(val_fraction * n_samples)));
  if (n_val >= n_samples) throw ConfigError("validation split leaves no training samples");
  val.assign(all.begin(), all.begin() + n_val);
  train.assign(all.begin() + n_val, all.end());
}

namespace {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const MlpModel& model) {
    for (int l = 0; l < 3; ++l) {
      mw.push_back(Eigen::MatrixXd::Zero(model.weights[static_cast<std::size_t>(l)].rows(),
                                         model.weights[static_cast<std::size_t>(l)].cols()));
      vw.push_back(mw.back());
      mb.push_back(Eigen::VectorXd::Zero(model.biases[static_cast<std::size_t>(l)].size()));
      vb.push_back(mb.back());
    }
  }

  void update(MlpModel& model, const ParameterGradients& grads, const TrainConfig& cfg) {
    ++step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
    const double lr = cfg.learning_rate;
    for (std::size_t l = 0; l < 3; ++l) {
      mw[l] = cfg.adam_beta1 * mw[l] + (1 - cfg.adam_beta1) * grads.weights[l];
      vw[l] = cfg.adam_beta2 * vw[l].array().matrix() +
              (1 - cfg.adam_beta2) * grads.weights[l].array().square().matrix();
      model.weights[l].array() -=
          lr * (mw[l].array() / bc1) / ((vw[l].array() / bc2).sqrt() + cfg.adam_epsilon);
      mb[l] = cfg.adam_beta1 * mb[l] + (1 - cfg.adam_beta1) * grads.biases[l];
      vb[l] = cfg.adam_beta2 * vb[l].array().matrix() +
              (1 - cfg.adam_beta2) * grads.biases[l].array().square().matrix();
      model.biases[l].array() -=
          lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + cfg.adam_epsilon);
    }
  }
};

}  // namespace

std::pair<MlpModel, TrainReport> train(const TrainConfig& config, const datagen::TrainingSet& data,
                                       const reduction::BasisSet& basis,
                                       const rod::RodProperties& props, const Pose& base) {
  config.validate();
  if (data.n_samples() == 0) throw ConfigError("empty training set");

  MlpModel model = init_model(static_cast<int>(data.n_markers()), config.hidden1, config.hidden2,
                              basis, props.rest_length, config.seed);
  model.marker_s = data.marker_s;

  std::vector<int> train_idx, val_idx;
  split_indices(static_cast<int>(data.n_samples()), config.val_fraction, config.seed, train_idx,
                val_idx);

  AdamState adam(model);
  std::mt19937_64 shuffle_rng(datagen::mix_seed(config.seed, 0x65706f6368ull));
  const double norm = 1.0 / (config.eta * double(data.n_markers()));

  TrainReport report;
  MlpModel best_model = model;
  double best_val = std::numeric_limits<double>::infinity();
  ParameterGradients grads;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);

    double train_total = 0;
    std::size_t train_count = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> batch(train_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                   train_idx.begin() + static_cast<std::ptrdiff_t>(stop));
      const double batch_loss = loss_gradient(model, data.features, batch, basis, props, base,
                                              data.marker_s, config.eta, grads);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch + 1 << ", batch " << start / static_cast<std::size_t>(config.batch_size);
        throw Diverged(msg.str());
      }
      adam.update(model, grads, config);
      train_total += batch_loss * double(batch.size());
      train_count += batch.size();
    }

    const double train_loss = train_total / double(train_count);
    const double val_loss =
        loss(model, data.features, val_idx, basis, props, base, data.marker_s, config.eta);
    if (!std::isfinite(val_loss)) {
      std::ostringstream msg;
      msg << "validation loss non-finite at epoch " << epoch + 1;
      throw Diverged(msg.str());
    }

    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    report.train_loss_norm.push_back(train_loss * norm);
    report.val_loss_norm.push_back(val_loss * norm);
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    if (val_loss < best_val) {
      best_val = val_loss;
      best_model = model;
      report.best_epoch = epoch;
    }
  }
  return {best_model, report};
}

InferResult infer(const MlpModel& model, const reduction::BasisSet& basis,
                  const rod::RodProperties& props, const Pose& base,
                  const rod::MeasurementSet& meas) {
  check_basis(model, basis);
  if (static_cast<int>(meas.markers.size()) * 9 != model.input_dim()) {
    throw MarkerLayoutMismatch("marker count does not match trained input layer");
  }
  if (model.marker_s.size() == static_cast<Eigen::Index>(meas.markers.size())) {
    for (Eigen::Index m = 0; m < model.marker_s.size(); ++m) {
      if (std::abs(meas.markers[static_cast<std::size_t>(m)].s - model.marker_s(m)) >
          1e-9 * props.rest_length) {
        throw MarkerLayoutMismatch("marker arc-lengths differ from trained layout");
      }
    }
  }

  Eigen::VectorXd features(model.input_dim());
  for (std::size_t m = 0; m < meas.markers.size(); ++m) {
    features.segment<9>(static_cast<Eigen::Index>(9 * m)) =
        datagen::marker_features(meas.markers[m].pose);
  }

  InferResult result;
  result.coeffs = forward(model, features);
  result.strain = reduction::synthesize_strain(basis, result.coeffs);
  result.posture = rod::integrate_kinematics(result.strain, base);
  result.error = rod::mismatch_cost(result.posture, result.strain, meas, props.rest_length) /
                 double(meas.markers.size());
  return result;
}

void check_basis(const MlpModel& model, const reduction::BasisSet& basis) {
  if (model.basis_checksum != basis.checksum()) {
    throw ChecksumMismatch("model was trained against a different basis set");
  }
}

void save_model(const MlpModel& model, const std::string& path) {
  model.validate();
  io::Archive ar;
  ar.kind = "model";
  std::ostringstream sizes;
  for (std::size_t i = 0; i < model.layer_sizes.size(); ++i) {
    if (i) sizes << ',';
    sizes << model.layer_sizes[i];
  }
  ar.set_meta("layer_sizes", sizes.str());
  ar.set_meta("activation", "silu");
  ar.set_meta_double("position_scale", model.position_scale);
  ar.set_meta_u64("basis_checksum", model.basis_checksum);
  for (int l = 0; l < 3; ++l) {
    ar.add_array("w" + std::to_string(l + 1), model.weights[static_cast<std::size_t>(l)]);
    ar.add_array("b" + std::to_string(l + 1), model.biases[static_cast<std::size_t>(l)]);
  }
  ar.add_array("out_mean", model.out_mean);
  ar.add_array("out_scale", model.out_scale);
  ar.add_array("marker_s", model.marker_s);
  io::write_archive(ar, path);
}

MlpModel load_model(const std::string& path) {
  io::Archive ar = io::read_archive(path, "model");
  MlpModel model;
  std::istringstream sizes(ar.get_meta("layer_sizes"));
  std::string tok;
  while (std::getline(sizes, tok, ',')) model.layer_sizes.push_back(std::stoi(tok));
  model.position_scale = ar.get_meta_double("position_scale");
  model.basis_checksum = ar.get_meta_u64("basis_checksum");
  for (int l = 0; l < 3; ++l) {
    model.weights.push_back(ar.array("w" + std::to_string(l + 1)));
    model.biases.push_back(ar.array("b" + std::to_string(l + 1)));
  }
  model.out_mean = ar.array("out_mean");
  model.out_scale = ar.array("out_scale");
  model.marker_s = ar.array("marker_s");
  model.validate();
  return model;
}

}  // namespace rodrecon::net
