#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "slamplan/errors.hpp"

namespace slamplan {

using Matrix3 = Eigen::Matrix3d;
using Point2 = Eigen::Vector2d;

/// How the three `sigma` entries of a document are read.
enum class CovarianceEntries { kVariance, kStddev };

inline CovarianceEntries parse_covariance_entries(std::string_view name) {
  if (name == "variance") return CovarianceEntries::kVariance;
  if (name == "stddev") return CovarianceEntries::kStddev;
  throw ParseError("covariance_entries must be 'variance' or 'stddev', got '" +
                   std::string(name) + "'");
}

inline std::string_view to_string(CovarianceEntries mode) {
  return mode == CovarianceEntries::kVariance ? "variance" : "stddev";
}

/// Diagonal covariance built from (x, y, theta) entries.
inline Matrix3 diagonal_covariance(const std::array<double, 3>& entries,
                                   CovarianceEntries mode = CovarianceEntries::kVariance) {
  Matrix3 cov = Matrix3::Zero();
  for (int k = 0; k < 3; ++k) {
    const double e = entries[static_cast<std::size_t>(k)];
    cov(k, k) = mode == CovarianceEntries::kVariance ? e : e * e;
  }
  return cov;
}

/// diag(0.1 m^2, 0.1 m^2, 0.001 rad^2): the initial covariance of every prior edge.
inline Matrix3 default_edge_covariance() { return diagonal_covariance({0.1, 0.1, 0.001}); }

inline bool is_spd(const Matrix3& cov) {
  if (!cov.allFinite()) return false;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Matrix3> llt(cov);
  return llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0;
}

/// Edge weight gamma = D-opt(cov^-1) = det(cov)^(-1/3).
inline double edge_weight(const Matrix3& cov) {
  const double det = cov.determinant();
  if (!(det > 0.0)) throw GraphError("edge weight requested for a non-SPD covariance");
  return std::exp(-std::log(det) / 3.0);
}

}  // namespace slamplan
