#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "slamplan/errors.hpp"

namespace slamplan {

using PoseIndex = std::size_t;

/// Relative pivot threshold below which a factorization is declared rank-deficient.
inline constexpr double kPivotTolerance = 1e-12;

/*
 * Incidence column of one edge in reduced coordinates: +1 at `plus`, -1 at
 * `minus`. Either entry is absent when that endpoint is the anchor.
 */
struct Incidence {
  std::optional<std::size_t> plus;
  std::optional<std::size_t> minus;

  bool empty() const { return !plus && !minus; }

  std::size_t first_nonzero() const {
    if (plus && minus) return std::min(*plus, *minus);
    return plus ? *plus : *minus;
  }

  Eigen::VectorXd dense(std::size_t dim) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (plus) b(static_cast<Eigen::Index>(*plus)) += 1.0;
    if (minus) b(static_cast<Eigen::Index>(*minus)) -= 1.0;
    return b;
  }
};

/// Incidence of pose pair (i, j) after removing the anchor's row.
inline Incidence reduced_incidence(PoseIndex i, PoseIndex j, PoseIndex anchor) {
  auto reduce = [anchor](PoseIndex p) -> std::optional<std::size_t> {
    if (p == anchor) return std::nullopt;
    return p < anchor ? p : p - 1;
  };
  return Incidence{reduce(i), reduce(j)};
}

struct WeightedEdge {
  PoseIndex i = 0;
  PoseIndex j = 0;
  double weight = 1.0;
};

/*
 * Lower-triangular Cholesky factor of a weighted reduced Laplacian,
 * L_gamma = R R^T, with the log-determinant kept alongside. Supports in-place
 * rank-1 updates; everything else is const and safe to call on copies
 * from different threads.
 */
class LaplacianFactor {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  LaplacianFactor() = default;

  /// Factorizes a symmetric matrix; throws RankDeficientError on a pivot below tolerance.
  static LaplacianFactor factorize(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("factorize: matrix is not square");
    const Eigen::Index n = a.rows();
    LaplacianFactor f;
    f.lower_ = RowMatrix::Zero(n, n);
    const double scale = n > 0 ? a.diagonal().cwiseAbs().maxCoeff() : 1.0;
    if (n > 0 && !(scale > 0.0)) throw RankDeficientError("factorize: zero matrix is rank-deficient");
    for (Eigen::Index k = 0; k < n; ++k) {
      double pivot = a(k, k);
      const double* rk = f.lower_.row(k).data();
      for (Eigen::Index m = 0; m < k; ++m) pivot -= rk[m] * rk[m];
      if (!(pivot > kPivotTolerance * scale)) {
        throw RankDeficientError("factorize: pivot " + std::to_string(pivot) + " at reduced index " +
                                 std::to_string(k) + " is below tolerance (disconnected pose graph)");
      }
      const double d = std::sqrt(pivot);
      f.lower_(k, k) = d;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        double s = a(i, k);
        const double* ri = f.lower_.row(i).data();
        for (Eigen::Index m = 0; m < k; ++m) s -= ri[m] * rk[m];
        f.lower_(i, k) = s / d;
      }
    }
    f.refresh_log_det();
    return f;
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower_.rows()); }
  double log_det() const { return log_det_; }
  const RowMatrix& lower() const { return lower_; }

  /// Reconstructed L_gamma = R R^T.
  Eigen::MatrixXd matrix() const { return lower_ * lower_.transpose(); }

  Eigen::MatrixXd inverse() const {
    const auto n = lower_.rows();
    Eigen::MatrixXd x = Eigen::MatrixXd::Identity(n, n);
    lower_.triangularView<Eigen::Lower>().solveInPlace(x);
    return x.transpose() * x;
  }

  /// b^T L^-1 b = |R^-1 b|^2, by one forward substitution starting at b's first nonzero.
  double quad_form(const Incidence& b) const {
    if (b.empty()) return 0.0;
    check_index(b);
    const std::size_t n = dim();
    const std::size_t s = b.first_nonzero();
    scratch_.assign(n, 0.0);
    if (b.plus) scratch_[*b.plus] += 1.0;
    if (b.minus) scratch_[*b.minus] -= 1.0;
    double q = 0.0;
    for (std::size_t k = s; k < n; ++k) {
      const double* rk = lower_.row(static_cast<Eigen::Index>(k)).data();
      double acc = scratch_[k];
      for (std::size_t m = s; m < k; ++m) acc -= rk[m] * scratch_[m];
      const double y = acc / rk[k];
      scratch_[k] = y;
      q += y * y;
    }
    return q;
  }

  double quad_form(const Eigen::VectorXd& b) const {
    if (static_cast<std::size_t>(b.size()) != dim()) {
      throw std::invalid_argument("quad_form: dimension mismatch");
    }
    const Eigen::VectorXd y = lower_.triangularView<Eigen::Lower>().solve(b);
    return y.squaredNorm();
  }

  /// In place: L <- L + gamma * b b^T.
  void rank1_update(double gamma, const Incidence& b) {
    if (!(gamma > 0.0)) throw std::invalid_argument("rank1_update: gamma must be positive");
    if (b.empty()) return;
    check_index(b);
    rank1_update_dense(std::sqrt(gamma) * b.dense(dim()), b.first_nonzero());
  }

  void rank1_update(double gamma, const Eigen::VectorXd& b) {
    if (!(gamma > 0.0)) throw std::invalid_argument("rank1_update: gamma must be positive");
    if (static_cast<std::size_t>(b.size()) != dim()) {
      throw std::invalid_argument("rank1_update: dimension mismatch");
    }
    rank1_update_dense(std::sqrt(gamma) * b, 0);
  }

 private:
  void check_index(const Incidence& b) const {
    if ((b.plus && *b.plus >= dim()) || (b.minus && *b.minus >= dim())) {
      throw std::invalid_argument("incidence index out of range for factor of dim " + std::to_string(dim()));
    }
    if (b.plus && b.minus && *b.plus == *b.minus) {
      throw std::invalid_argument("incidence endpoints coincide");
    }
  }

  void rank1_update_dense(Eigen::VectorXd v, std::size_t start) {
    const auto n = lower_.rows();
    for (Eigen::Index k = static_cast<Eigen::Index>(start); k < n; ++k) {
      const double vk = v(k);
      if (vk == 0.0) continue;
      const double lkk = lower_(k, k);
      const double r = std::hypot(lkk, vk);
      const double c = r / lkk;
      const double s = vk / lkk;
      lower_(k, k) = r;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const double lik = (lower_(i, k) + s * v(i)) / c;
        v(i) = c * v(i) - s * lik;
        lower_(i, k) = lik;
      }
    }
    refresh_log_det();
  }

  void refresh_log_det() {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < lower_.rows(); ++k) acc += std::log(lower_(k, k));
    log_det_ = 2.0 * acc;
  }

  RowMatrix lower_;
  double log_det_ = 0.0;
  mutable std::vector<double> scratch_;
};

/// Dense weighted reduced Laplacian sum_j gamma_j B_j B_j^T with the anchor removed.
inline Eigen::MatrixXd reduced_laplacian_matrix(std::size_t poses, std::span<const WeightedEdge> edges,
                                                PoseIndex anchor) {
  if (anchor >= poses) throw std::invalid_argument("reduced_laplacian: anchor out of range");
  const auto n = static_cast<Eigen::Index>(poses - 1);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    if (e.i >= poses || e.j >= poses || e.i == e.j) {
      throw std::invalid_argument("reduced_laplacian: invalid edge endpoints");
    }
    if (!(e.weight > 0.0)) throw std::invalid_argument("reduced_laplacian: weights must be positive");
    const Incidence b = reduced_incidence(e.i, e.j, anchor);
    if (b.plus) l(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.plus)) += e.weight;
    if (b.minus) l(static_cast<Eigen::Index>(*b.minus), static_cast<Eigen::Index>(*b.minus)) += e.weight;
    if (b.plus && b.minus) {
      l(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.minus)) -= e.weight;
      l(static_cast<Eigen::Index>(*b.minus), static_cast<Eigen::Index>(*b.plus)) -= e.weight;
    }
  }
  return l;
}

inline LaplacianFactor reduced_laplacian(std::size_t poses, std::span<const WeightedEdge> edges,
                                         PoseIndex anchor = 0) {
  return LaplacianFactor::factorize(reduced_laplacian_matrix(poses, edges, anchor));
}

/// log D-opt = log det / n.
inline double log_dopt(const LaplacianFactor& f) {
  if (f.dim() == 0) throw std::invalid_argument("dopt: factor has dimension 0");
  return f.log_det() / static_cast<double>(f.dim());
}

/// D-opt(L) = det(L)^(1/n).
inline double dopt(const LaplacianFactor& f) { return std::exp(log_dopt(f)); }

}  // namespace slamplan
