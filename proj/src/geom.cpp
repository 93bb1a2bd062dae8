#include "rodrecon/geom.hpp"

namespace rodrecon::geom {

namespace {

// d/dtheta[(1-cos)/theta^2] / theta, with series fallback (cancellation
// below ~1e-2 is worse than the truncated series).
double b_prime_over_theta(double theta, double theta2) {
  if (theta < 1e-2) {
    return -1.0 / 12.0 + theta2 / 180.0 - theta2 * theta2 / 6720.0;
  }
  return (theta * std::sin(theta) - 2.0 * (1.0 - std::cos(theta))) / (theta2 * theta2);
}

// d/dtheta[(theta-sin)/theta^3] / theta
double c_prime_over_theta(double theta, double theta2) {
  if (theta < 1e-2) {
    return -1.0 / 60.0 + theta2 / 1260.0 - theta2 * theta2 / 60480.0;
  }
  const double num = (1.0 - std::cos(theta)) * theta - 3.0 * (theta - std::sin(theta));
  return num / (theta2 * theta2 * theta);
}

}  // namespace

ExpSe3Jacobian exp_se3_jacobian(const Twist& xi, double h) {
  const Vec3 u = h * xi.angular;
  const Vec3 t = h * xi.linear;
  const double theta2 = u.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 uh = hat(u);
  const Mat3 uh2 = uh * uh;
  const Mat3 rot = exp_so3_vec(u);

  double b, c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 vmat = Mat3::Identity() + b * uh + c * uh2;
  const double bp = b_prime_over_theta(theta, theta2);
  const double cp = c_prime_over_theta(theta, theta2);

  ExpSe3Jacobian jac;
  jac.dx_dnu = h * vmat;

  for (int i = 0; i < 3; ++i) {
    const Mat3 ei = hat(Vec3::Unit(i));
    Mat3 dr;
    if (theta < 1e-4) {
      dr = ei + 0.5 * (ei * uh + uh * ei);
    } else {
      // Gallego-Yezzi closed form for the rotation derivative.
      const Vec3 w = u.cross((Mat3::Identity() - rot) * Vec3::Unit(i));
      dr = ((u(i) * uh + hat(w)) / theta2) * rot;
    }
    jac.dR_domega[i] = h * dr;

    const Mat3 dv = bp * u(i) * uh + b * ei + cp * u(i) * uh2 + c * (ei * uh + uh * ei);
    jac.dx_domega.col(i) = h * (dv * t);
  }
  return jac;
}

}  // namespace rodrecon::geom
