#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace slamplan {

/// Planar pose (x, y, theta).
using Pose2 = Eigen::Vector3d;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline Eigen::Matrix2d rotation(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// a (+) b
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  Pose2 out;
  out.head<2>() = a.head<2>() + rotation(a(2)) * b.head<2>();
  out(2) = wrap_angle(a(2) + b(2));
  return out;
}

inline Pose2 inverse(const Pose2& a) {
  Pose2 out;
  out.head<2>() = -(rotation(a(2)).transpose() * a.head<2>());
  out(2) = wrap_angle(-a(2));
  return out;
}

/// Relative pose a^-1 (+) b.
inline Pose2 between(const Pose2& a, const Pose2& b) {
  Pose2 out;
  out.head<2>() = rotation(a(2)).transpose() * (b.head<2>() - a.head<2>());
  out(2) = wrap_angle(b(2) - a(2));
  return out;
}

/// Residual z^-1 (+) (xi^-1 (+) xj) with the angle wrapped.
inline Eigen::Vector3d edge_error(const Pose2& xi, const Pose2& xj, const Pose2& z) {
  return between(z, between(xi, xj));
}

struct EdgeJacobians {
  Eigen::Matrix3d a;  // d e / d xi
  Eigen::Matrix3d b;  // d e / d xj
};

/// Analytic Jacobians of edge_error for additive increments on (x, y, theta).
inline EdgeJacobians edge_jacobians(const Pose2& xi, const Pose2& xj, const Pose2& z) {
  const Eigen::Matrix2d rz_t = rotation(z(2)).transpose();
  const Eigen::Matrix2d ri_t = rotation(xi(2)).transpose();
  const double c = std::cos(xi(2)), s = std::sin(xi(2));
  Eigen::Matrix2d dri_t;  // derivative of Ri^T with respect to theta_i
  dri_t << -s, c, -c, -s;
  const Eigen::Vector2d dt = xj.head<2>() - xi.head<2>();
  EdgeJacobians j;
  j.a.setZero();
  j.b.setZero();
  j.a.topLeftCorner<2, 2>() = -rz_t * ri_t;
  j.a.topRightCorner<2, 1>() = rz_t * dri_t * dt;
  j.a(2, 2) = -1.0;
  j.b.topLeftCorner<2, 2>() = rz_t * ri_t;
  j.b(2, 2) = 1.0;
  return j;
}

}  // namespace slamplan
