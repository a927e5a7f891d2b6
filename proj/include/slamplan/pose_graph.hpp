#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <json.hpp>

#include "slamplan/errors.hpp"
#include "slamplan/plan.hpp"
#include "slamplan/se2.hpp"
#include "slamplan/world.hpp"

namespace slamplan {

enum class EdgeKind { kOdometry, kRevisit, kLoopAction };

inline std::string to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::kOdometry: return "odometry";
    case EdgeKind::kRevisit: return "revisit";
    case EdgeKind::kLoopAction: return "loop_action";
  }
  return "unknown";
}

/// Relative-pose measurement z between poses i < j.
struct Measurement {
  PoseIndex i = 0;
  PoseIndex j = 0;
  Pose2 z = Pose2::Zero();
  Matrix3 covariance = Matrix3::Identity();
  EdgeKind kind = EdgeKind::kOdometry;
};

/*
 * Region-granularity pose graph of an executed walk: one pose per walk step.
 * `estimates` holds dead reckoning until an optimizer overwrites it; pose 0
 * is anchored at ground truth.
 */
struct SimPoseGraph {
  std::vector<VertexIndex> pose_vertex;
  std::vector<Pose2> truth;
  std::vector<Pose2> estimates;
  std::vector<Measurement> edges;

  std::size_t pose_count() const { return truth.size(); }
  std::size_t count(EdgeKind k) const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [k](const Measurement& m) { return m.kind == k; }));
  }
  std::size_t loop_edge_count() const { return edges.size() - count(EdgeKind::kOdometry); }
};

/*
 * Grows a SimPoseGraph one step at a time. Ground-truth headings point along
 * the last motion (pose 0 faces +x). Odometry noise is drawn with the mean
 * degeneracy of the two regions; every revisit closes a loop to the earliest
 * pose at that vertex with the world's loop-closure covariance.
 */
class PoseGraphBuilder {
 public:
  PoseGraphBuilder(const WorldModel& world, std::uint64_t seed) : world_(&world), rng_(seed) {}

  const SimPoseGraph& graph() const { return pg_; }
  SimPoseGraph take() { return std::move(pg_); }

  /// Appends a pose at vertex v; returns its index. `loop_action` tags the revisit edge it creates.
  PoseIndex add_pose(VertexIndex v, bool loop_action = false) {
    const PriorGraph& g = world_->true_graph;
    if (v >= g.vertex_count()) throw GraphError("pose at unknown vertex index " + std::to_string(v));
    const PoseIndex k = pg_.truth.size();
    Pose2 truth;
    truth.head<2>() = g.position(v);
    truth(2) = 0.0;
    if (k == 0) {
      pg_.pose_vertex.push_back(v);
      pg_.truth.push_back(truth);
      pg_.estimates.push_back(truth);
      earliest_.assign(g.vertex_count(), kNoPose);
      earliest_[v] = 0;
      return 0;
    }
    const VertexIndex prev = pg_.pose_vertex.back();
    if (!g.adjacent(prev, v)) {
      throw GraphError("step " + std::to_string(k) + " (" + g.id(prev) + " -> " + g.id(v) + ") is not an edge of the world");
    }
    const Eigen::Vector2d d = g.position(v) - g.position(prev);
    truth(2) = wrap_angle(std::atan2(d.y(), d.x()));
    pg_.pose_vertex.push_back(v);
    pg_.truth.push_back(truth);

    const Matrix3 odo_cov = world_->odometry_covariance(prev, v);
    Measurement odo = measure(k - 1, k, odo_cov, EdgeKind::kOdometry);
    pg_.estimates.push_back(compose(pg_.estimates[k - 1], odo.z));
    pg_.edges.push_back(odo);

    if (earliest_[v] == kNoPose) {
      earliest_[v] = k;
    } else {
      pg_.edges.push_back(measure(earliest_[v], k, world_->loop_closure_covariance,
                                  loop_action ? EdgeKind::kLoopAction : EdgeKind::kRevisit));
    }
    return k;
  }

 private:
  Measurement measure(PoseIndex i, PoseIndex j, const Matrix3& cov, EdgeKind kind) {
    Measurement m;
    m.i = i;
    m.j = j;
    m.covariance = cov;
    m.kind = kind;
    m.z = between(pg_.truth[i], pg_.truth[j]);
    if (world_->noise_scale > 0.0) {
      const Matrix3 l = Eigen::LLT<Matrix3>(cov).matrixL();
      std::normal_distribution<double> n01(0.0, 1.0);
      Eigen::Vector3d w;
      for (int c = 0; c < 3; ++c) w(c) = n01(rng_);
      const Eigen::Vector3d noise = world_->noise_scale * (l * w);
      m.z += noise;
      m.z(2) = wrap_angle(m.z(2));
    }
    return m;
  }

  const WorldModel* world_;
  std::mt19937_64 rng_;
  SimPoseGraph pg_;
  std::vector<PoseIndex> earliest_;
};

/// Walk indices of each action's target arrival, found as anchor -> target in order.
inline std::vector<std::size_t> action_target_steps(const Plan& plan) {
  std::vector<std::size_t> steps;
  std::size_t pos = 0;
  const auto& seq = plan.walk.sequence;
  for (const auto& a : plan.actions) {
    while (pos < seq.size() && seq[pos] != a.anchor) ++pos;
    while (pos < seq.size() && seq[pos] != a.target) ++pos;
    if (pos >= seq.size()) throw GraphError("plan walk does not realize its loop actions");
    steps.push_back(pos);
  }
  return steps;
}

/// Executes a plan's walk in the world: one pose per step, noisy measurements, deterministic per seed.
inline SimPoseGraph simulate_execution(const Plan& plan, const WorldModel& world, std::uint64_t seed) {
  if (plan.walk.empty()) throw GraphError("simulate_execution: empty plan walk");
  walk_length(world.true_graph, plan.walk.sequence);
  const auto targets = action_target_steps(plan);
  PoseGraphBuilder b(world, seed);
  std::size_t next_target = 0;
  for (std::size_t k = 0; k < plan.walk.size(); ++k) {
    const bool action = next_target < targets.size() && targets[next_target] == k;
    if (action) ++next_target;
    b.add_pose(plan.walk.sequence[k], action);
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Gauss-Newton
// ---------------------------------------------------------------------------

struct OptimizerOptions {
  int max_iters = 50;
  double tol = 1e-9;       // on the infinity norm of the accepted step
  int max_halvings = 10;
};

struct OptimizationResult {
  std::vector<Pose2> estimates;
  std::vector<double> objective;  // F at the start and after each accepted iteration
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;     // at the returned estimates
};

/// F = sum e^T Sigma^-1 e over all measurements.
inline double pose_graph_objective(const SimPoseGraph& pg, const std::vector<Pose2>& x) {
  double f = 0.0;
  for (const auto& m : pg.edges) {
    const Eigen::Vector3d e = edge_error(x[m.i], x[m.j], m.z);
    f += e.dot(m.covariance.inverse() * e);
  }
  return f;
}

namespace detail {

/// Sparse J^T W J over non-anchored poses (pose k maps to block k - 1), plus the gradient J^T W e.
inline void normal_equations(const SimPoseGraph& pg, const std::vector<Pose2>& x, double scale,
                             Eigen::SparseMatrix<double>& h, Eigen::VectorXd* grad) {
  const auto dim = static_cast<Eigen::Index>(3 * (pg.pose_count() - 1));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(pg.edges.size() * 36 + static_cast<std::size_t>(dim));
  if (grad) *grad = Eigen::VectorXd::Zero(dim);
  for (const auto& m : pg.edges) {
    const Matrix3 w = scale * m.covariance.inverse();
    const EdgeJacobians j = edge_jacobians(x[m.i], x[m.j], m.z);
    const Eigen::Vector3d e = edge_error(x[m.i], x[m.j], m.z);
    const std::array<std::pair<PoseIndex, const Matrix3*>, 2> blocks{{{m.i, &j.a}, {m.j, &j.b}}};
    for (const auto& [p, jp] : blocks) {
      if (p == 0) continue;
      const auto rp = static_cast<Eigen::Index>(3 * (p - 1));
      if (grad) grad->segment<3>(rp) += jp->transpose() * w * e;
      for (const auto& [q, jq] : blocks) {
        if (q == 0) continue;
        const auto rq = static_cast<Eigen::Index>(3 * (q - 1));
        const Matrix3 blk = jp->transpose() * w * *jq;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) trip.emplace_back(rp + r, rq + c, blk(r, c));
      }
    }
  }
  h.resize(dim, dim);
  h.setFromTriplets(trip.begin(), trip.end());
}

}  // namespace detail

/*
 * Gauss-Newton with step halving. Pose 0 stays fixed. An iteration whose
 * step cannot reduce F within max_halvings raises OptimizationError unless
 * F is already stationary to rounding.
 */
inline OptimizationResult optimize_pose_graph(const SimPoseGraph& pg, const OptimizerOptions& opt = {}) {
  OptimizationResult r;
  r.estimates = pg.estimates;
  if (pg.pose_count() == 0) throw OptimizationError("optimize_pose_graph: empty pose graph");
  double f = pose_graph_objective(pg, r.estimates);
  r.objective.push_back(f);
  if (pg.pose_count() == 1) {
    r.converged = true;
    return r;
  }
  Eigen::SparseMatrix<double> h;
  Eigen::VectorXd g;
  for (int it = 0; it < opt.max_iters; ++it) {
    detail::normal_equations(pg, r.estimates, 2.0, h, &g);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
      throw OptimizationError("optimize_pose_graph: normal equations are singular (disconnected pose graph)");
    }
    const Eigen::VectorXd dx = ldlt.solve(-g);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<Pose2> trial(r.estimates.size());
    double f_trial = f;
    for (int half = 0; half <= opt.max_halvings; ++half, alpha *= 0.5) {
      trial[0] = r.estimates[0];
      for (std::size_t p = 1; p < trial.size(); ++p) {
        trial[p] = r.estimates[p] + alpha * dx.segment<3>(static_cast<Eigen::Index>(3 * (p - 1)));
        trial[p](2) = wrap_angle(trial[p](2));
      }
      f_trial = pose_graph_objective(pg, trial);
      if (f_trial <= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (f_trial - f <= 1e-12 * std::max(1.0, f)) {
        r.converged = true;
        break;
      }
      throw OptimizationError("optimize_pose_graph: objective increased from " + std::to_string(f) + " to " +
                              std::to_string(f_trial) + " after " + std::to_string(opt.max_halvings) + " step halvings");
    }
    const double step = alpha * dx.lpNorm<Eigen::Infinity>();
    r.estimates = std::move(trial);
    f = f_trial;
    r.objective.push_back(f);
    ++r.iterations;
    if (step < opt.tol) {
      r.converged = true;
      break;
    }
  }
  detail::normal_equations(pg, r.estimates, 2.0, h, &g);
  r.gradient_norm = g.norm();
  return r;
}

// ---------------------------------------------------------------------------
// Information metrics
// ---------------------------------------------------------------------------

struct FimResult {
  double log_det = 0.0;
  std::size_t dim = 0;
  double log_dopt() const { return log_det / static_cast<double>(dim); }
  double dopt() const { return std::exp(log_dopt()); }
};

/// Dense FIM H = scale * sum J^T Sigma^-1 J at `x`, anchored pose removed.
inline Eigen::MatrixXd fim_matrix(const SimPoseGraph& pg, const std::vector<Pose2>& x, bool half = true) {
  Eigen::SparseMatrix<double> h;
  detail::normal_equations(pg, x, half ? 0.5 : 1.0, h, nullptr);
  return Eigen::MatrixXd(h);
}

namespace detail {

inline double sparse_log_det(const Eigen::SparseMatrix<double>& m, const char* what) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw RankDeficientError(std::string(what) + ": factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  const double tol = kPivotTolerance * d.cwiseAbs().maxCoeff();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (!(d(k) > tol)) throw RankDeficientError(std::string(what) + ": matrix is rank-deficient");
    acc += std::log(d(k));
  }
  return acc;
}

}  // namespace detail

/// log det and D-opt of the FIM, D-opt(H) = det(H)^(1/(3n)); `half` keeps the 1/2 factor on H.
inline FimResult fim(const SimPoseGraph& pg, const std::vector<Pose2>& x, bool half = true) {
  if (pg.pose_count() < 2) throw RankDeficientError("fim: needs at least two poses");
  Eigen::SparseMatrix<double> h;
  detail::normal_equations(pg, x, half ? 0.5 : 1.0, h, nullptr);
  return {detail::sparse_log_det(h, "fim"), static_cast<std::size_t>(h.rows())};
}

inline FimResult fim(const SimPoseGraph& pg, bool half = true) { return fim(pg, pg.estimates, half); }

/// Weighted reduced Laplacian of the measurement graph, gamma = det(Sigma^-1)^(1/3) per edge.
inline FimResult measurement_laplacian(const SimPoseGraph& pg) {
  if (pg.pose_count() < 2) throw RankDeficientError("measurement_laplacian: needs at least two poses");
  const auto n = static_cast<Eigen::Index>(pg.pose_count() - 1);
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& m : pg.edges) {
    const double w = edge_weight(m.covariance);
    const Incidence b = reduced_incidence(m.i, m.j, 0);
    if (b.plus) trip.emplace_back(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.plus), w);
    if (b.minus) trip.emplace_back(static_cast<Eigen::Index>(*b.minus), static_cast<Eigen::Index>(*b.minus), w);
    if (b.plus && b.minus) {
      trip.emplace_back(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.minus), -w);
      trip.emplace_back(static_cast<Eigen::Index>(*b.minus), static_cast<Eigen::Index>(*b.plus), -w);
    }
  }
  Eigen::SparseMatrix<double> l(n, n);
  l.setFromTriplets(trip.begin(), trip.end());
  return {detail::sparse_log_det(l, "measurement_laplacian"), static_cast<std::size_t>(n)};
}

/// RMSE of translational error. Estimates share the ground-truth frame through the anchored pose 0.
inline double ape_rmse(const std::vector<Pose2>& estimates, const std::vector<Pose2>& truth) {
  if (estimates.size() != truth.size()) {
    throw std::invalid_argument("ape_rmse: " + std::to_string(estimates.size()) + " estimates vs " +
                                std::to_string(truth.size()) + " ground-truth poses");
  }
  if (truth.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) acc += (estimates[k].head<2>() - truth[k].head<2>()).squaredNorm();
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

struct MissionMetrics {
  double ape_rmse = 0.0;
  double total_distance = 0.0;
  std::size_t pose_count = 0;
  double mean_degree = 0.0;
  double dopt_predicted = 0.0;  // D-opt of the measurement-graph weighted Laplacian
  double dopt_fim = 0.0;        // D-opt of the FIM at the optimized estimates
  bool assumption_ok = true;
};

/// Metrics of an optimized pose graph (`pg.estimates` must hold the optimizer output).
inline MissionMetrics compute_metrics(const SimPoseGraph& pg, double total_distance, bool assumption_ok,
                                      bool fim_half = true) {
  MissionMetrics m;
  m.pose_count = pg.pose_count();
  m.total_distance = total_distance;
  m.assumption_ok = assumption_ok;
  m.ape_rmse = ape_rmse(pg.estimates, pg.truth);
  m.mean_degree = m.pose_count ? 2.0 * static_cast<double>(pg.edges.size()) / static_cast<double>(m.pose_count) : 0.0;
  if (m.pose_count >= 2) {
    m.dopt_predicted = measurement_laplacian(pg).dopt();
    m.dopt_fim = fim(pg, fim_half).dopt();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

inline std::string metrics_csv_header() {
  return "seed,strategy,n_pose,k,ape_rmse,d_total,dopt_predicted,dopt_fim,assumption_ok";
}

inline std::string metrics_csv_row(std::uint64_t seed, const std::string& strategy, const MissionMetrics& m) {
  std::ostringstream ss;
  ss << seed << ',' << strategy << ',' << m.pose_count << ',' << format_number(m.mean_degree) << ','
     << format_number(m.ape_rmse) << ',' << format_number(m.total_distance) << ',' << format_number(m.dopt_predicted)
     << ',' << format_number(m.dopt_fim) << ',' << (m.assumption_ok ? "true" : "false");
  return ss.str();
}

/// Ground truth and estimates per pose, plus the measurement topology.
inline nlohmann::json trajectory_json(const SimPoseGraph& pg, const PriorGraph& g) {
  nlohmann::json doc;
  doc["poses"] = nlohmann::json::array();
  for (std::size_t k = 0; k < pg.pose_count(); ++k) {
    const auto& t = pg.truth[k];
    const auto& e = pg.estimates[k];
    doc["poses"].push_back({{"vertex", id_json(g, pg.pose_vertex[k])},
                            {"truth", {t(0), t(1), t(2)}},
                            {"estimate", {e(0), e(1), e(2)}}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& m : pg.edges) doc["edges"].push_back({{"i", m.i}, {"j", m.j}, {"kind", to_string(m.kind)}});
  return doc;
}

}  // namespace slamplan
