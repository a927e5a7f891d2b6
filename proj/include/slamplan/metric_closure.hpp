#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "slamplan/prior_graph.hpp"

namespace slamplan {

/*
 * All-pairs shortest paths over a PriorGraph revision. Built by one Dijkstra
 * run per source; next_hop(u, v) is the first vertex after u on the stored
 * shortest u->v path. Ties are broken towards the smaller predecessor index,
 * so closures are reproducible.
 */
class MetricClosure {
 public:
  MetricClosure() = default;

  explicit MetricClosure(const PriorGraph& g)
      : n_(g.vertex_count()), revision_(g.revision()), dist_(n_, n_), next_(n_ * n_, kNoVertex) {
    dist_.setConstant(std::numeric_limits<double>::infinity());
    std::vector<VertexIndex> parent(n_);
    for (VertexIndex s = 0; s < n_; ++s) single_source(g, s, parent);
    // Summation order differs between runs; pin both halves to the same value.
    for (Eigen::Index i = 0; i < dist_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < dist_.cols(); ++j) dist_(j, i) = dist_(i, j);
    }
  }

  std::size_t size() const { return n_; }
  std::uint64_t revision() const { return revision_; }
  double dist(VertexIndex u, VertexIndex v) const { return dist_(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)); }
  const Eigen::MatrixXd& distances() const { return dist_; }
  VertexIndex next_hop(VertexIndex u, VertexIndex v) const { return next_[u * n_ + v]; }

  /// Vertex sequence u, ..., v along the stored shortest path (just {u} when u == v).
  std::vector<VertexIndex> path(VertexIndex u, VertexIndex v) const {
    std::vector<VertexIndex> out{u};
    while (u != v) {
      u = next_hop(u, v);
      out.push_back(u);
    }
    return out;
  }

  bool is_current_for(const PriorGraph& g) const {
    return n_ == g.vertex_count() && revision_ == g.revision();
  }

 private:
  void single_source(const PriorGraph& g, VertexIndex s, std::vector<VertexIndex>& parent) {
    using Item = std::pair<double, VertexIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<double> d(n_, std::numeric_limits<double>::infinity());
    std::vector<char> done(n_, 0);
    d[s] = 0.0;
    parent[s] = s;
    heap.emplace(0.0, s);
    while (!heap.empty()) {
      const auto [du, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = 1;
      for (const auto& [w, e] : g.neighbors(u)) {
        const double cand = du + g.edge(e).length;
        if (cand < d[w] || (cand == d[w] && !done[w] && u < parent[w])) {
          d[w] = cand;
          parent[w] = u;
          heap.emplace(cand, w);
        }
      }
    }
    for (VertexIndex v = 0; v < n_; ++v) {
      dist_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(v)) = d[v];
    }
    // The path s -> v read backwards from v gives the *last* hop; store the
    // first hop of v -> s instead, which is parent[v] in this tree.
    for (VertexIndex v = 0; v < n_; ++v) {
      if (v != s) next_[v * n_ + s] = parent[v];
    }
  }

  std::size_t n_ = 0;
  std::uint64_t revision_ = 0;
  Eigen::MatrixXd dist_;
  std::vector<VertexIndex> next_;
};

}  // namespace slamplan
