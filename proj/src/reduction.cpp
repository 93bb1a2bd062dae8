#include "rodrecon/reduction.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "rodrecon/errors.hpp"
#include "rodrecon/hash.hpp"

namespace rodrecon::reduction {

void StrainDataset::validate() const {
  if (samples.size() < 2) throw ConfigError("strain dataset needs at least 2 samples");
  for (const auto& s : samples) {
    if (s.cols() != grid.size()) throw LengthMismatch("dataset sample grid size mismatch");
  }
}

std::uint64_t BasisSet::checksum() const {
  Fnv1a h;
  h.update_doubles(grid.data(), static_cast<std::size_t>(grid.size()));
  const std::int64_t nb = n_basis;
  const std::int64_t inext = inextensible ? 1 : 0;
  h.update(&nb, sizeof(nb));
  h.update(&inext, sizeof(inext));
  for (const auto& sb : strains) {
    h.update_doubles(sb.mean_fn.data(), static_cast<std::size_t>(sb.mean_fn.size()));
    h.update_doubles(sb.basis_fns.data(), static_cast<std::size_t>(sb.basis_fns.size()));
    h.update_doubles(sb.coeff_mean.data(), static_cast<std::size_t>(sb.coeff_mean.size()));
    h.update_doubles(sb.coeff_std.data(), static_cast<std::size_t>(sb.coeff_std.size()));
  }
  return h.digest();
}

namespace {

StrainBasis fit_one_strain(const Eigen::MatrixXd& rows, int n_basis, const PcaOptions& opts) {
  const Eigen::Index k = rows.rows();
  const Eigen::Index n = rows.cols();

  StrainBasis sb;
  sb.mean_fn = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - sb.mean_fn.transpose();

  Eigen::VectorXd var = centered.array().square().colwise().sum() / double(k - 1);
  sb.std_fn = var.array().sqrt();
  const double max_std = sb.std_fn.maxCoeff();
  if (max_std == 0.0) {
    // strain is identical across all samples: nothing to decompose
    sb.std_fn.setOnes();
    sb.basis_fns = Eigen::MatrixXd::Zero(n, n_basis);
    sb.eigvecs_std = Eigen::MatrixXd::Zero(n, n_basis);
    for (int j = 0; j < n_basis && j < n; ++j) sb.eigvecs_std(j, j) = 1.0;
    sb.eigenvalues = Eigen::VectorXd::Zero(n_basis);
    sb.coeff_mean = Eigen::VectorXd::Zero(n_basis);
    sb.coeff_std = Eigen::VectorXd::Zero(n_basis);
    sb.retained_variance_fraction = 1.0;
    return sb;
  }
  if (opts.std_floor_enabled) {
    sb.std_fn = sb.std_fn.cwiseMax(opts.std_floor_rel * max_std);
  } else if (sb.std_fn.minCoeff() == 0.0) {
    throw DegenerateData("strain component constant at some grid points and std floor disabled");
  }

  const Eigen::MatrixXd z = centered.array().rowwise() / sb.std_fn.transpose().array();
  const Eigen::MatrixXd cov = z.transpose() * z / double(k - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd all_vals = eig.eigenvalues();  // ascending
  const double total = std::max(all_vals.cwiseMax(0.0).sum(), 0.0);

  sb.eigvecs_std.resize(n, n_basis);
  sb.eigenvalues.resize(n_basis);
  double retained = 0;
  for (int j = 0; j < n_basis; ++j) {
    const Eigen::Index idx = n - 1 - j;
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    // canonical sign: largest-magnitude entry positive
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    sb.eigvecs_std.col(j) = v;
    sb.eigenvalues(j) = std::max(all_vals(idx), 0.0);
    retained += sb.eigenvalues(j);
  }
  sb.retained_variance_fraction = total > 0 ? retained / total : 1.0;
  sb.basis_fns = sb.eigvecs_std.array().colwise() * sb.std_fn.array();

  const Eigen::MatrixXd coeffs = z * sb.eigvecs_std;  // k x n_basis
  sb.coeff_mean = coeffs.colwise().mean();
  Eigen::MatrixXd cc = coeffs.rowwise() - sb.coeff_mean.transpose();
  sb.coeff_std = (cc.array().square().colwise().sum() / double(k - 1)).sqrt();
  return sb;
}

StrainBasis frozen_strain(const Eigen::VectorXd& mean_fn, int n_basis) {
  StrainBasis sb;
  const Eigen::Index n = mean_fn.size();
  sb.mean_fn = mean_fn;
  sb.std_fn = Eigen::VectorXd::Ones(n);
  sb.basis_fns = Eigen::MatrixXd::Zero(n, n_basis);
  sb.eigvecs_std = Eigen::MatrixXd::Zero(n, n_basis);
  sb.eigenvalues = Eigen::VectorXd::Zero(n_basis);
  sb.coeff_mean = Eigen::VectorXd::Zero(n_basis);
  sb.coeff_std = Eigen::VectorXd::Zero(n_basis);
  sb.retained_variance_fraction = 1.0;
  sb.frozen = true;
  return sb;
}

}  // namespace

BasisSet fit_pca(const StrainDataset& data, int n_basis, const PcaOptions& opts) {
  data.validate();
  const Eigen::Index k = static_cast<Eigen::Index>(data.samples.size());
  const Eigen::Index n = data.grid.size();
  if (n_basis < 1 || n_basis > std::min<Eigen::Index>(k - 1, n)) {
    throw ConfigError("n_basis must be in [1, min(sample count - 1, grid size)]");
  }

  BasisSet basis;
  basis.grid = data.grid;
  basis.n_basis = n_basis;
  basis.inextensible = opts.inextensible;

  Eigen::MatrixXd rows(k, n);
  for (int i = 0; i < 6; ++i) {
    for (Eigen::Index t = 0; t < k; ++t) rows.row(t) = data.samples[static_cast<size_t>(t)].row(i);
    if (opts.inextensible && i >= 3) {
      basis.strains[static_cast<size_t>(i)] = frozen_strain(rows.colwise().mean(), n_basis);
    } else {
      basis.strains[static_cast<size_t>(i)] = fit_one_strain(rows, n_basis, opts);
    }
  }
  return basis;
}

Eigen::VectorXd project(const BasisSet& basis, const StrainMatrix& sample) {
  if (sample.cols() != basis.grid.size()) throw LengthMismatch("sample grid size mismatch");
  Eigen::VectorXd coeffs(basis.coeff_dim());
  for (int i = 0; i < basis.n_active_strains(); ++i) {
    const auto& sb = basis.strains[static_cast<size_t>(i)];
    const Eigen::VectorXd z =
        (sample.row(i).transpose() - sb.mean_fn).array() / sb.std_fn.array();
    coeffs.segment(i * basis.n_basis, basis.n_basis) = sb.eigvecs_std.transpose() * z;
  }
  return coeffs;
}

StrainField synthesize_strain(const BasisSet& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != basis.coeff_dim()) {
    throw LengthMismatch("coefficient vector length does not match basis");
  }
  StrainField field;
  field.grid = basis.grid;
  field.values.resize(6, basis.grid.size());
  for (int i = 0; i < 6; ++i) {
    const auto& sb = basis.strains[static_cast<size_t>(i)];
    Eigen::VectorXd fn = sb.mean_fn;
    if (i < basis.n_active_strains()) {
      fn += sb.basis_fns * coeffs.segment(i * basis.n_basis, basis.n_basis);
    }
    field.values.row(i) = fn.transpose();
  }
  return field;
}

Eigen::MatrixXd sample_coefficients(const BasisSet& basis, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("coefficient sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(basis.coeff_dim(), count);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < basis.n_active_strains(); ++i) {
      const auto& sb = basis.strains[static_cast<size_t>(i)];
      for (int j = 0; j < basis.n_basis; ++j) {
        out(i * basis.n_basis + j, k) = sb.coeff_mean(j) + sb.coeff_std(j) * unit(rng);
      }
    }
  }
  return out;
}

}  // namespace rodrecon::reduction
