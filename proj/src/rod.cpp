#include "rodrecon/rod.hpp"

#include <algorithm>
#include <cmath>

namespace rodrecon::rod {

namespace {

void check_finite(const StrainField& field) {
  if (!field.values.allFinite()) {
    throw NonFiniteStrain("strain field contains non-finite entries");
  }
}

Twist segment_midpoint_strain(const StrainField& field, Eigen::Index seg) {
  const Strain6 mid = 0.5 * (field.values.col(seg) + field.values.col(seg + 1));
  return Twist{mid.head<3>(), mid.tail<3>()};
}

// Locates s_query on the grid: either a node index (node >= 0) or a segment
// with a positive partial step delta.
struct GridLocation {
  Eigen::Index node = -1;
  Eigen::Index segment = -1;
  double delta = 0;
};

GridLocation locate(const Eigen::VectorXd& grid, double s_query) {
  const double length = grid(grid.size() - 1);
  const double snap = 1e-12 * length;
  if (s_query < -snap || s_query > length + snap) {
    throw OutOfRange("arc length query outside [0, L0]");
  }
  // grid is strictly increasing; find the first node >= s_query
  const double* begin = grid.data();
  const double* end = begin + grid.size();
  const double* it = std::lower_bound(begin, end, s_query);
  Eigen::Index upper = std::min<Eigen::Index>(it - begin, grid.size() - 1);
  if (std::abs(grid(upper) - s_query) <= snap) {
    return GridLocation{upper, -1, 0};
  }
  if (upper > 0 && std::abs(grid(upper - 1) - s_query) <= snap) {
    return GridLocation{upper - 1, -1, 0};
  }
  GridLocation loc;
  loc.segment = upper - 1;
  loc.delta = s_query - grid(upper - 1);
  return loc;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  const Eigen::Index n = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = grid(i + 1) - grid(i);
    w(i) += 0.5 * h;
    w(i + 1) += 0.5 * h;
  }
  return w;
}

struct PoseAdjoint {
  Mat3 rotation = Mat3::Zero();
  Vec3 position = Vec3::Zero();
};

// sigma_bar[i] = <Tbar, dT/dsigma_i> for the exponential of sigma over step h
Strain6 contract_exp_jacobian(const PoseAdjoint& tbar, const Twist& sigma, double h) {
  const geom::ExpSe3Jacobian jac = geom::exp_se3_jacobian(sigma, h);
  Strain6 g;
  for (int i = 0; i < 3; ++i) {
    g(i) = tbar.rotation.cwiseProduct(jac.dR_domega[i]).sum() +
           tbar.position.dot(jac.dx_domega.col(i));
  }
  g.tail<3>() = jac.dx_dnu.transpose() * tbar.position;
  return g;
}

}  // namespace

void RodProperties::validate() const {
  if (!(rest_length > 0)) throw ConfigError("rod rest_length must be > 0");
  if (n_nodes < 2) throw ConfigError("rod n_nodes must be >= 2");
  if (!(stiffness_angular.minCoeff() > 0) || !(stiffness_linear.minCoeff() > 0)) {
    throw ConfigError("rod stiffness entries must be > 0");
  }
}

void MeasurementSet::validate(double rod_length) const {
  if (markers.empty()) throw ConfigError("measurement set needs at least one marker");
  double prev = 0;
  for (const auto& m : markers) {
    if (!(m.s > prev)) throw ConfigError("marker arc-lengths must satisfy 0 < s_1 < ... < s_Nm");
    prev = m.s;
  }
  if (std::abs(prev - rod_length) > 1e-9 * rod_length) {
    throw ConfigError("last marker must sit at the tip s = L0");
  }
}

Eigen::VectorXd uniform_grid(double rod_length, int n_nodes) {
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(n_nodes, 0.0, rod_length);
  g(0) = 0.0;
  g(n_nodes - 1) = rod_length;
  return g;
}

StrainField rest_field(const RodProperties& props) {
  StrainField f;
  f.grid = uniform_grid(props.rest_length, props.n_nodes);
  f.values = props.rest_strain.as_vector().replicate(1, props.n_nodes);
  return f;
}

std::vector<Pose> integrate_kinematics(const StrainField& field, const Pose& base) {
  check_finite(field);
  const Eigen::Index n = field.n_nodes();
  std::vector<Pose> poses(static_cast<size_t>(n));
  poses[0] = base;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = field.grid(i + 1) - field.grid(i);
    poses[i + 1] = geom::compose(poses[i], geom::exp_se3(segment_midpoint_strain(field, i), h));
  }
  return poses;
}

Pose interpolate_pose(const std::vector<Pose>& poses, const StrainField& field,
                      double s_query) {
  const GridLocation loc = locate(field.grid, s_query);
  if (loc.node >= 0) return poses[static_cast<size_t>(loc.node)];
  return geom::compose(poses[static_cast<size_t>(loc.segment)],
                       geom::exp_se3(segment_midpoint_strain(field, loc.segment), loc.delta));
}

double potential_energy(const StrainField& field, const RodProperties& props) {
  const Eigen::VectorXd w = trapezoid_weights(field.grid);
  const Strain6 rest = props.rest_strain.as_vector();
  Strain6 stiffness;
  stiffness << props.stiffness_angular, props.stiffness_linear;
  double energy = 0;
  for (Eigen::Index i = 0; i < field.n_nodes(); ++i) {
    const Strain6 d = field.values.col(i) - rest;
    energy += 0.5 * w(i) * d.dot(stiffness.cwiseProduct(d));
  }
  return energy;
}

double mismatch_cost(const std::vector<Pose>& poses, const StrainField& field,
                     const MeasurementSet& meas, double rod_length) {
  double cost = 0;
  for (const auto& m : meas.markers) {
    cost += geom::pose_mismatch(interpolate_pose(poses, field, m.s), m.pose, rod_length);
  }
  return cost;
}

double objective(const StrainField& field, const Pose& base, const MeasurementSet& meas,
                 const RodProperties& props, double eta) {
  const std::vector<Pose> poses = integrate_kinematics(field, base);
  return potential_energy(field, props) +
         0.5 * eta * mismatch_cost(poses, field, meas, props.rest_length);
}

double objective_with_gradient(const StrainField& field, const Pose& base,
                               const MeasurementSet& meas, const RodProperties& props,
                               double eta, StrainMatrix& grad) {
  const Eigen::Index n = field.n_nodes();
  const double length = props.rest_length;
  const std::vector<Pose> poses = integrate_kinematics(field, base);

  grad.setZero(6, n);
  std::vector<PoseAdjoint> pose_bar(static_cast<size_t>(n));

  // Mismatch term: seed each marker's pose adjoint, backprop any partial
  // step into its segment's midpoint strain directly.
  double phi = 0;
  for (const auto& m : meas.markers) {
    const GridLocation loc = locate(field.grid, m.s);
    Pose at;
    if (loc.node >= 0) {
      at = poses[static_cast<size_t>(loc.node)];
    } else {
      const Twist sigma = segment_midpoint_strain(field, loc.segment);
      at = geom::compose(poses[static_cast<size_t>(loc.segment)], geom::exp_se3(sigma, loc.delta));
    }
    phi += geom::pose_mismatch(at, m.pose, length);

    const double scale = 0.5 * eta;
    const Vec3 xbar = scale * 2.0 * (at.position - m.pose.position) / (length * length);
    const Mat3 rbar = scale * (at.rotation - m.pose.rotation) / 4.0;

    if (loc.node >= 0) {
      pose_bar[static_cast<size_t>(loc.node)].rotation += rbar;
      pose_bar[static_cast<size_t>(loc.node)].position += xbar;
    } else {
      const size_t j = static_cast<size_t>(loc.segment);
      const Twist sigma = segment_midpoint_strain(field, loc.segment);
      const Pose step = geom::exp_se3(sigma, loc.delta);
      // through compose(q_j, step)
      pose_bar[j].rotation += rbar * step.rotation.transpose() + xbar * step.position.transpose();
      pose_bar[j].position += xbar;
      PoseAdjoint step_bar;
      step_bar.rotation = poses[j].rotation.transpose() * rbar;
      step_bar.position = poses[j].rotation.transpose() * xbar;
      const Strain6 sigma_bar = contract_exp_jacobian(step_bar, sigma, loc.delta);
      grad.col(loc.segment) += 0.5 * sigma_bar;
      grad.col(loc.segment + 1) += 0.5 * sigma_bar;
    }
  }

  // Reverse sweep through the product-of-exponentials chain.
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    const size_t j = static_cast<size_t>(i);
    const PoseAdjoint& out = pose_bar[j + 1];
    const double h = field.grid(i + 1) - field.grid(i);
    const Twist sigma = segment_midpoint_strain(field, i);
    const Pose step = geom::exp_se3(sigma, h);

    pose_bar[j].rotation +=
        out.rotation * step.rotation.transpose() + out.position * step.position.transpose();
    pose_bar[j].position += out.position;

    PoseAdjoint step_bar;
    step_bar.rotation = poses[j].rotation.transpose() * out.rotation;
    step_bar.position = poses[j].rotation.transpose() * out.position;
    const Strain6 sigma_bar = contract_exp_jacobian(step_bar, sigma, h);
    grad.col(i) += 0.5 * sigma_bar;
    grad.col(i + 1) += 0.5 * sigma_bar;
  }

  // Elastic term gradient: trapezoid weights times the quadratic form slope.
  const Eigen::VectorXd w = trapezoid_weights(field.grid);
  const Strain6 rest = props.rest_strain.as_vector();
  Strain6 stiffness;
  stiffness << props.stiffness_angular, props.stiffness_linear;
  double energy = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Strain6 d = field.values.col(i) - rest;
    energy += 0.5 * w(i) * d.dot(stiffness.cwiseProduct(d));
    grad.col(i) += w(i) * stiffness.cwiseProduct(d);
  }

  return energy + 0.5 * eta * phi;
}

StrainMatrix objective_gradient(const StrainField& field, const Pose& base,
                                const MeasurementSet& meas, const RodProperties& props,
                                double eta) {
  StrainMatrix grad;
  objective_with_gradient(field, base, meas, props, eta, grad);
  return grad;
}

}  // namespace rodrecon::rod
