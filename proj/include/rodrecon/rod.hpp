#ifndef RODRECON_ROD_HPP
#define RODRECON_ROD_HPP

#include <Eigen/Core>
#include <vector>

#include "rodrecon/errors.hpp"
#include "rodrecon/geom.hpp"

namespace rodrecon::rod {

using geom::Mat3;
using geom::Pose;
using geom::Twist;
using geom::Vec3;

using Strain6 = Eigen::Matrix<double, 6, 1>;
using StrainMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Six strain components at one station: angular (two curvatures, twist)
/// and linear (two shears, stretch).
struct StrainVector {
  Vec3 kappa = Vec3::Zero();
  Vec3 nu = Vec3(0, 0, 1);

  Strain6 as_vector() const {
    Strain6 v;
    v << kappa, nu;
    return v;
  }
  Twist as_twist() const { return Twist{kappa, nu}; }
};

/// Strain sampled on a strictly increasing arc-length grid spanning [0, L0].
/// Row layout of values: 0-2 angular, 3-5 linear.
struct StrainField {
  Eigen::VectorXd grid;
  StrainMatrix values;

  Eigen::Index n_nodes() const { return grid.size(); }
  StrainVector at(Eigen::Index i) const {
    return StrainVector{values.col(i).head<3>(), values.col(i).tail<3>()};
  }
};

struct RodProperties {
  double rest_length = 0.2;
  int n_nodes = 100;
  Vec3 stiffness_angular = Vec3::Ones();
  Vec3 stiffness_linear = Vec3::Ones();
  StrainVector rest_strain;

  void validate() const;
};

/// Marker arc-lengths and measured poses. The base pose at s=0 is known
/// separately and is not a marker; the last marker sits at the tip.
struct MeasurementSet {
  struct Marker {
    double s = 0;
    Pose pose;
  };
  std::vector<Marker> markers;

  void validate(double rod_length) const;
};

Eigen::VectorXd uniform_grid(double rod_length, int n_nodes);
StrainField rest_field(const RodProperties& props);

/// Integrates d/ds q = q * hat(strain) from the base pose with one exact
/// SE(3) exponential per segment at the segment midpoint strain.
std::vector<Pose> integrate_kinematics(const StrainField& field, const Pose& base);

/// Pose at an arbitrary arc length: exact node pose when s coincides with a
/// grid node, otherwise a partial exponential step from the lower node.
Pose interpolate_pose(const std::vector<Pose>& poses, const StrainField& field,
                      double s_query);

/// Linear-elastic strain energy about the rest strain, trapezoid rule.
double potential_energy(const StrainField& field, const RodProperties& props);

double mismatch_cost(const std::vector<Pose>& poses, const StrainField& field,
                     const MeasurementSet& meas, double rod_length);

double objective(const StrainField& field, const Pose& base, const MeasurementSet& meas,
                 const RodProperties& props, double eta);

/// Objective value and its exact gradient with respect to every strain grid
/// value, by reverse accumulation through the pose chain.
double objective_with_gradient(const StrainField& field, const Pose& base,
                               const MeasurementSet& meas, const RodProperties& props,
                               double eta, StrainMatrix& grad);

StrainMatrix objective_gradient(const StrainField& field, const Pose& base,
                                const MeasurementSet& meas, const RodProperties& props,
                                double eta);

}  // namespace rodrecon::rod

#endif
