#ifndef RODRECON_GEOM_HPP
#define RODRECON_GEOM_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <array>
#include <cmath>

namespace rodrecon::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Below this angle the closed-form Rodrigues coefficients switch to their
// Taylor series; truncation error stays under 1e-12.
inline constexpr double kSmallAngle = 1e-6;

/// Rigid transform: orthonormal director frame plus center-line position.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  static Pose Identity() { return Pose{}; }
};

/// se(3) element split into angular (curvature/twist) and linear
/// (shear/stretch) parts.
struct Twist {
  Vec3 angular = Vec3::Zero();
  Vec3 linear = Vec3::Zero();
};

/// hat(v) * w == v x w
inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  // clang-format off
  m <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

/// Rodrigues formula for exp(hat(u)).
inline Mat3 exp_so3_vec(const Vec3& u) {
  const double theta2 = u.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 uh = hat(u);
  double a, b;  // R = I + a*uh + b*uh^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * uh + b * (uh * uh);
}

inline Mat3 exp_so3(const Vec3& omega, double h) { return exp_so3_vec(h * omega); }

/// Left Jacobian V(u) of SO(3): exp translation factor, V(u)*t.
inline Mat3 so3_left_jacobian(const Vec3& u) {
  const double theta2 = u.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 uh = hat(u);
  double b, c;  // V = I + b*uh + c*uh^2
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + b * uh + c * (uh * uh);
}

/// Closed-form SE(3) exponential for a constant twist over arc step h.
inline Pose exp_se3(const Twist& xi, double h) {
  const Vec3 u = h * xi.angular;
  Pose p;
  p.rotation = exp_so3_vec(u);
  p.position = so3_left_jacobian(u) * (h * xi.linear);
  return p;
}

inline Pose compose(const Pose& a, const Pose& b) {
  Pose c;
  c.rotation = a.rotation * b.rotation;
  c.position = a.rotation * b.position + a.position;
  return c;
}

inline Pose inverse(const Pose& p) {
  Pose q;
  q.rotation = p.rotation.transpose();
  q.position = -(q.rotation * p.position);
  return q;
}

inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

/// Nearest rotation in Frobenius norm (polar decomposition via SVD).
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 q = svd.matrixU() * svd.matrixV().transpose();
  if (q.determinant() < 0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1;
    q = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return q;
}

/// Per-marker mismatch: position error normalized by rod length plus
/// Frobenius rotation error scaled into [0,1].
inline double pose_mismatch(const Pose& p, const Pose& m, double rod_length) {
  const double pos = (p.position - m.position).squaredNorm() / (rod_length * rod_length);
  const double rot = (p.rotation - m.rotation).squaredNorm() / 8.0;
  return pos + rot;
}

/// Partial derivatives of exp_se3(xi, h) entries with respect to the six
/// twist components. Columns of dx_domega are d(position)/d(omega_i).
struct ExpSe3Jacobian {
  std::array<Mat3, 3> dR_domega;
  Mat3 dx_domega;
  Mat3 dx_dnu;
};

ExpSe3Jacobian exp_se3_jacobian(const Twist& xi, double h);

}  // namespace rodrecon::geom

#endif
