#ifndef RODRECON_REDUCTION_HPP
#define RODRECON_REDUCTION_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "rodrecon/rod.hpp"

namespace rodrecon::reduction {

using rod::StrainField;
using rod::StrainMatrix;

/// Collection of strain fields sharing one grid.
struct StrainDataset {
  Eigen::VectorXd grid;
  std::vector<StrainMatrix> samples;

  void validate() const;
};

/// Per-strain PCA result. basis_fns columns are eigenfunctions re-weighted
/// by the (floored) pointwise std function, so synthesis maps coefficients
/// straight to unstandardized strains; eigvecs_std are the unit-norm
/// standardized-space eigenvectors used for projection.
struct StrainBasis {
  Eigen::VectorXd mean_fn;
  Eigen::VectorXd std_fn;
  Eigen::MatrixXd basis_fns;
  Eigen::MatrixXd eigvecs_std;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd coeff_mean;
  Eigen::VectorXd coeff_std;
  double retained_variance_fraction = 1.0;
  bool frozen = false;
};

struct BasisSet {
  Eigen::VectorXd grid;
  int n_basis = 0;
  bool inextensible = false;
  std::array<StrainBasis, 6> strains;

  int n_active_strains() const { return inextensible ? 3 : 6; }
  int coeff_dim() const { return n_active_strains() * n_basis; }
  std::uint64_t checksum() const;
};

struct PcaOptions {
  bool inextensible = false;
  // floor on the pointwise std function, relative to its max over the grid
  double std_floor_rel = 1e-8;
  bool std_floor_enabled = true;
};

BasisSet fit_pca(const StrainDataset& data, int n_basis, const PcaOptions& opts = {});

/// Coefficients of one sample in the basis (standardized-space projection).
Eigen::VectorXd project(const BasisSet& basis, const StrainMatrix& sample);

StrainField synthesize_strain(const BasisSet& basis, const Eigen::VectorXd& coeffs);

/// Seeded i.i.d. Gaussian coefficient draws from the stored per-coefficient
/// statistics; column k is sample k.
Eigen::MatrixXd sample_coefficients(const BasisSet& basis, int count, std::uint64_t seed);

}  // namespace rodrecon::reduction

#endif
