#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "slamplan/covariance.hpp"
#include "slamplan/laplacian.hpp"
#include "slamplan/metric_closure.hpp"
#include "slamplan/walk.hpp"

namespace slamplan {

inline constexpr PoseIndex kNoPose = std::numeric_limits<PoseIndex>::max();

/*
 * Region-granularity pose graph induced by a walk: one pose per covered
 * vertex (numbered by first visit), one edge per distinct prior edge the walk
 * traverses. Pose 0 is the anchor of the reduced Laplacian.
 */
struct AbstractedPoseGraph {
  std::vector<VertexIndex> pose_to_vertex;
  std::vector<PoseIndex> vertex_to_pose;  // kNoPose for vertices the walk misses
  std::vector<WeightedEdge> edges;        // i < j, first-traversal order
  LaplacianFactor factor;

  std::size_t pose_count() const { return pose_to_vertex.size(); }
  /// Dimension of the reduced Laplacian.
  std::size_t n() const { return pose_to_vertex.empty() ? 0 : pose_to_vertex.size() - 1; }

  bool has_edge(PoseIndex a, PoseIndex b) const {
    const PoseIndex lo = std::min(a, b), hi = std::max(a, b);
    return std::any_of(edges.begin(), edges.end(), [&](const WeightedEdge& e) { return e.i == lo && e.j == hi; });
  }
};

/// Builds the abstracted pose graph; edge weights come from the prior edge covariances.
inline AbstractedPoseGraph abstract_pose_graph(const std::vector<VertexIndex>& seq, const PriorGraph& g) {
  AbstractedPoseGraph apg;
  apg.vertex_to_pose.assign(g.vertex_count(), kNoPose);
  std::vector<char> edge_seen(g.edge_count(), 0);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const VertexIndex v = seq[k];
    if (apg.vertex_to_pose.at(v) == kNoPose) {
      apg.vertex_to_pose[v] = apg.pose_to_vertex.size();
      apg.pose_to_vertex.push_back(v);
    }
    if (k == 0) continue;
    const auto e = g.find_edge(seq[k - 1], v);
    if (!e) throw GraphError("abstract_pose_graph: walk step " + std::to_string(k) + " is not a prior edge");
    if (edge_seen[*e]) continue;
    edge_seen[*e] = 1;
    const PoseIndex a = apg.vertex_to_pose[seq[k - 1]], b = apg.vertex_to_pose[v];
    apg.edges.push_back({std::min(a, b), std::max(a, b), edge_weight(g.edge(*e).covariance)});
  }
  if (apg.pose_count() > 0) apg.factor = reduced_laplacian(apg.pose_count(), apg.edges, 0);
  return apg;
}

inline AbstractedPoseGraph abstract_pose_graph(const Walk& w, const PriorGraph& g) {
  return abstract_pose_graph(w.sequence, g);
}

/// A planner-level loop edge between poses i > j that the walk does not connect directly.
struct LoopEdgeCandidate {
  PoseIndex i = 0;
  PoseIndex j = 0;
  double omega = 0.0;  // shortest prior-graph distance between the two regions
  double gamma = 0.0;
  Incidence b;

  friend bool operator==(const LoopEdgeCandidate& x, const LoopEdgeCandidate& y) {
    return x.i == y.i && x.j == y.j;
  }
};

/// gamma of a loop edge: D-opt of the inverse mean of both regions' degeneracy matrices.
inline double candidate_gamma(const PriorGraph& g, VertexIndex a, VertexIndex b) {
  return edge_weight(0.5 * (g.region_covariance(a) + g.region_covariance(b)));
}

/*
 * All pose pairs (i, j), i > j, absent from the abstracted pose graph, in
 * lexicographic (i, j) order. `min_anchor` restricts the later pose i, used
 * when poses before it are already in the past.
 */
inline std::vector<LoopEdgeCandidate> enumerate_candidates(const AbstractedPoseGraph& apg, const MetricClosure& mc,
                                                           const PriorGraph& g, PoseIndex min_anchor = 1) {
  const std::size_t poses = apg.pose_count();
  std::vector<char> adjacent(poses * poses, 0);
  for (const auto& e : apg.edges) adjacent[e.i * poses + e.j] = adjacent[e.j * poses + e.i] = 1;
  std::vector<LoopEdgeCandidate> out;
  for (PoseIndex i = std::max<PoseIndex>(min_anchor, 1); i < poses; ++i) {
    for (PoseIndex j = 0; j < i; ++j) {
      if (adjacent[i * poses + j]) continue;
      const VertexIndex vi = apg.pose_to_vertex[i], vj = apg.pose_to_vertex[j];
      LoopEdgeCandidate c;
      c.i = i;
      c.j = j;
      c.omega = mc.dist(vi, vj);
      c.gamma = candidate_gamma(g, vi, vj);
      c.b = reduced_incidence(i, j, 0);
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective algebra. J(S') = D-opt(L_tsp + sum gamma B B^T) / (D_tsp + 2 sum omega),
// handled in the log domain.
// ---------------------------------------------------------------------------

inline double log_objective(const LaplacianFactor& f, double distance) {
  return log_dopt(f) - std::log(distance);
}

/// log of the Laplacian part of delta: log(1 + gamma q) / n.
inline double log_gain(const LoopEdgeCandidate& c, const LaplacianFactor& f) {
  return std::log1p(c.gamma * f.quad_form(c.b)) / static_cast<double>(f.dim());
}

inline double log_delta(const LoopEdgeCandidate& c, const LaplacianFactor& f, double current_distance) {
  return log_gain(c, f) - std::log1p(2.0 * c.omega / current_distance);
}

/// delta(z, P') = (1 + gamma b^T L^-1 b)^(1/n) / (1 + 2 omega / D(P')).
inline double delta(const LoopEdgeCandidate& c, const LaplacianFactor& f, double current_distance) {
  if (!(current_distance > 0.0)) throw std::invalid_argument("delta: current distance must be positive");
  return std::exp(log_delta(c, f, current_distance));
}

/// True when the pruning inequality holds: (1 + gamma q)^(1/n) <= 1 + omega / D_tsp.
inline bool prunable(const LoopEdgeCandidate& c, const LaplacianFactor& f, double d_tsp) {
  return log_gain(c, f) <= std::log1p(c.omega / d_tsp);
}

/// Distance threshold D_tsp * ((1 + gamma* q*)^(1/n) - 1) at the numerator maximizer.
inline double omega_max(const std::vector<LoopEdgeCandidate>& cands, const LaplacianFactor& f, double d_tsp) {
  if (cands.empty()) throw std::invalid_argument("omega_max: no candidates");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : cands) best = std::max(best, log_gain(c, f));
  return d_tsp * std::expm1(best);
}

inline std::vector<LoopEdgeCandidate> prune(const std::vector<LoopEdgeCandidate>& cands, const LaplacianFactor& f,
                                            double d_tsp) {
  std::vector<LoopEdgeCandidate> out;
  for (const auto& c : cands) {
    if (!prunable(c, f, d_tsp)) out.push_back(c);
  }
  return out;
}

struct GreedyOptions {
  bool prune = true;
};

struct GreedyResult {
  std::vector<LoopEdgeCandidate> selected;  // in selection order
  std::vector<double> log_objective;        // log J before any selection, then after each one
  std::size_t candidate_count = 0;
  std::size_t after_omega_max = 0;
  std::size_t after_gain_test = 0;
  std::vector<std::size_t> remaining_per_iteration;
  std::vector<double> omega_max_per_iteration;
  std::size_t quad_form_evaluations = 0;
  LaplacianFactor factor;  // L_tsp plus every selected loop edge
  double distance = 0.0;   // D_tsp + 2 sum omega
  bool assumption_ok = true;
};

/*
 * Greedy loop-edge selection. Each round evaluates delta for every live
 * candidate against the current factor and adds the argmax while it exceeds
 * one (ties: smallest (i, j)). With pruning on, a numerator-maximizer
 * distance threshold runs first, and every round drops candidates that meet
 * the pruning inequality against the current factor; the distance
 * denominator stays at D_tsp so dropped candidates can never win later.
 */
inline GreedyResult greedy_select(const AbstractedPoseGraph& apg, std::vector<LoopEdgeCandidate> cands,
                                  double base_distance, const GreedyOptions& opt = {}) {
  GreedyResult r;
  r.factor = apg.factor;
  r.distance = base_distance;
  r.candidate_count = cands.size();
  r.after_omega_max = r.after_gain_test = cands.size();
  if (apg.n() == 0 || !(base_distance > 0.0)) {
    r.after_omega_max = r.after_gain_test = 0;
    r.candidate_count = 0;
    return r;
  }
  const double n = static_cast<double>(apg.n());
  const double d_tsp = base_distance;
  r.log_objective.push_back(log_objective(r.factor, r.distance));

  double threshold = std::numeric_limits<double>::infinity();
  if (opt.prune && !cands.empty()) {
    // One dense inverse prices every candidate in O(1).
    const Eigen::MatrixXd inv = r.factor.inverse();
    auto q_of = [&](const Incidence& b) {
      double q = 0.0;
      if (b.plus) q += inv(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.plus));
      if (b.minus) q += inv(static_cast<Eigen::Index>(*b.minus), static_cast<Eigen::Index>(*b.minus));
      if (b.plus && b.minus) {
        q -= 2.0 * inv(static_cast<Eigen::Index>(*b.plus), static_cast<Eigen::Index>(*b.minus));
      }
      return q;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) best = std::max(best, std::log1p(c.gamma * q_of(c.b)) / n);
    threshold = d_tsp * std::expm1(best);
    std::erase_if(cands, [&](const LoopEdgeCandidate& c) { return c.omega >= threshold; });
    r.after_omega_max = cands.size();
  }

  bool first = true;
  while (true) {
    if (opt.prune) std::erase_if(cands, [&](const LoopEdgeCandidate& c) { return c.omega >= threshold; });
    std::size_t best_idx = cands.size();
    double best_log_delta = -std::numeric_limits<double>::infinity();
    double best_gain = -std::numeric_limits<double>::infinity();
    std::vector<char> drop(cands.size(), 0);
    for (std::size_t k = 0; k < cands.size(); ++k) {
      const auto& c = cands[k];
      const double gain = std::log1p(c.gamma * r.factor.quad_form(c.b)) / n;
      ++r.quad_form_evaluations;
      if (opt.prune && gain <= std::log1p(c.omega / d_tsp)) {
        drop[k] = 1;
        continue;
      }
      best_gain = std::max(best_gain, gain);
      const double ld = gain - std::log1p(2.0 * c.omega / r.distance);
      if (ld > best_log_delta) {
        best_log_delta = ld;
        best_idx = k;
      }
    }
    if (opt.prune) {
      std::vector<LoopEdgeCandidate> kept;
      std::size_t new_best = kept.size();
      for (std::size_t k = 0; k < cands.size(); ++k) {
        if (drop[k]) continue;
        if (k == best_idx) new_best = kept.size();
        kept.push_back(cands[k]);
      }
      best_idx = best_idx < cands.size() ? new_best : kept.size();
      cands = std::move(kept);
      threshold = cands.empty() ? 0.0 : d_tsp * std::expm1(best_gain);
    }
    if (first) {
      r.after_gain_test = cands.size();
      first = false;
    }
    r.omega_max_per_iteration.push_back(threshold);
    if (best_idx >= cands.size() || !(best_log_delta > 0.0)) {
      r.remaining_per_iteration.push_back(cands.size());
      break;
    }
    const LoopEdgeCandidate chosen = cands[best_idx];
    cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(best_idx));
    r.factor.rank1_update(chosen.gamma, chosen.b);
    r.distance += 2.0 * chosen.omega;
    r.selected.push_back(chosen);
    r.log_objective.push_back(r.log_objective.back() + best_log_delta);
    r.remaining_per_iteration.push_back(cands.size());
    if (r.distance > 2.0 * d_tsp) r.assumption_ok = false;
  }
  return r;
}

/// log J of `subset` evaluated with a fresh factorization.
inline double objective_from_scratch(const AbstractedPoseGraph& apg, const std::vector<LoopEdgeCandidate>& subset,
                                     double base_distance) {
  std::vector<WeightedEdge> edges = apg.edges;
  double distance = base_distance;
  for (const auto& c : subset) {
    edges.push_back({c.j, c.i, c.gamma});
    distance += 2.0 * c.omega;
  }
  const LaplacianFactor f = reduced_laplacian(apg.pose_count(), edges, 0);
  return log_objective(f, distance);
}

struct BruteForceResult {
  std::vector<LoopEdgeCandidate> best;
  double log_objective = 0.0;
  std::size_t subsets_evaluated = 0;
};

inline constexpr std::size_t kBruteForceLimit = 20;

/// Exhaustive Problem-1 solver over subsets of at most `max_subset` candidates.
inline BruteForceResult brute_force_select(const AbstractedPoseGraph& apg, const std::vector<LoopEdgeCandidate>& cands,
                                           double base_distance, std::size_t max_subset = kBruteForceLimit) {
  if (cands.size() > kBruteForceLimit) {
    throw SizeError("brute_force_select: " + std::to_string(cands.size()) + " candidates exceeds limit of " +
                    std::to_string(kBruteForceLimit));
  }
  BruteForceResult r;
  r.log_objective = -std::numeric_limits<double>::infinity();
  const std::uint32_t total = std::uint32_t{1} << cands.size();
  std::vector<LoopEdgeCandidate> subset;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > max_subset) continue;
    subset.clear();
    for (std::size_t k = 0; k < cands.size(); ++k) {
      if (mask >> k & 1U) subset.push_back(cands[k]);
    }
    const double lj = objective_from_scratch(apg, subset, base_distance);
    ++r.subsets_evaluated;
    if (lj > r.log_objective) {
      r.log_objective = lj;
      r.best = subset;
    }
  }
  return r;
}

}  // namespace slamplan
