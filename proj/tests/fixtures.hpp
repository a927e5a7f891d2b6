#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <random>

#include "slamplan/loop_selector.hpp"
#include "slamplan/prior_graph.hpp"
#include "slamplan/tsp.hpp"
#include "oracles.hpp"

namespace fixtures {

struct E {
  std::size_t u, v;
  std::optional<double> length = std::nullopt;
};

/// Small graph helper: vertex k gets id names[k] and position pos[k].
inline slamplan::PriorGraph make_graph(const std::vector<std::string>& names, const std::vector<slamplan::Point2>& pos,
                                       const std::vector<E>& edges, std::size_t start = 0) {
  std::vector<slamplan::Vertex> vs;
  for (std::size_t k = 0; k < names.size(); ++k) vs.push_back({names[k], pos[k]});
  std::vector<slamplan::EdgeInput> es;
  for (const auto& e : edges) {
    slamplan::EdgeInput in;
    in.u = e.u;
    in.v = e.v;
    in.length = e.length;
    es.push_back(in);
  }
  return slamplan::PriorGraph(std::move(vs), es, start);
}

/// a - b - c along the x axis, unit spacing.
inline slamplan::PriorGraph path3() {
  return make_graph({"a", "b", "c"}, {{0, 0}, {1, 0}, {2, 0}}, {{0, 1}, {1, 2}});
}

/// Unit-edge triangle a, b, c.
inline slamplan::PriorGraph triangle() {
  return make_graph({"a", "b", "c"}, {{0, 0}, {1, 0}, {0.5, 0.8}}, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
}

/// Unit square cycle a-b-c-d-a.
inline slamplan::PriorGraph cycle4() {
  return make_graph({"a", "b", "c", "d"}, {{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                    {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
}

/// Same topology with identity region covariances, so every edge weight is 1.
inline slamplan::PriorGraph unit_gamma(const slamplan::PriorGraph& g) {
  return g.with_region_covariances(std::vector<slamplan::Matrix3>(g.vertex_count(), slamplan::Matrix3::Identity()));
}

/// A random loop-selection problem: graph, closure, TSP walk, its pose graph and candidates.
struct SelectionInstance {
  slamplan::PriorGraph g;
  slamplan::MetricClosure mc;
  slamplan::Walk walk;
  slamplan::AbstractedPoseGraph apg;
  std::vector<slamplan::LoopEdgeCandidate> cands;
};

/*
 * Random connected graph with n vertices and randomly scaled region
 * covariances, planned with the open-TSP stage. Candidate count is at most
 * max_cands (resampled until it fits).
 */
inline SelectionInstance random_selection_instance(int n, double p, std::mt19937_64& rng,
                                                   std::size_t max_cands = 1000000, double box = 10.0) {
  std::uniform_real_distribution<double> scale(0.3, 6.0);
  while (true) {
    slamplan::PriorGraph base = oracle::random_prior_graph(n, p, rng, box);
    std::vector<slamplan::Matrix3> regions;
    for (int k = 0; k < n; ++k) {
      const double s = scale(rng);
      regions.push_back(slamplan::diagonal_covariance({0.1 * s, 0.1 * s, 0.001 * s}));
    }
    slamplan::PriorGraph g = base.with_region_covariances(std::move(regions));
    slamplan::MetricClosure mc(g);
    const auto order = slamplan::solve_open_tsp(slamplan::build_tour_costs(mc, g.start()));
    slamplan::Walk walk = slamplan::expand_to_walk(order, mc, g);
    slamplan::AbstractedPoseGraph apg = slamplan::abstract_pose_graph(walk, g);
    auto cands = slamplan::enumerate_candidates(apg, mc, g);
    if (cands.size() > max_cands) continue;
    return {std::move(g), std::move(mc), std::move(walk), std::move(apg), std::move(cands)};
  }
}

}  // namespace fixtures
