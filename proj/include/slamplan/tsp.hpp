#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "slamplan/errors.hpp"
#include "slamplan/metric_closure.hpp"
#include "slamplan/walk.hpp"

namespace slamplan {

/*
 * Complete-graph TSP instance over a subset of prior-graph vertices.
 * Local index k refers to vertices[k]; vertices are kept in increasing graph
 * index order so local-index tie-breaking equals vertex-id tie-breaking.
 * Incoming costs of the start are zero, which turns the closed tour into an
 * open path from the start.
 */
struct TourCosts {
  std::vector<VertexIndex> vertices;
  Eigen::MatrixXd cost;
  std::size_t start = 0;  // local index

  std::size_t size() const { return vertices.size(); }
  double operator()(std::size_t a, std::size_t b) const {
    return cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
};

inline TourCosts build_tour_costs(const MetricClosure& mc, std::vector<VertexIndex> subset, VertexIndex start) {
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  const auto it = std::find(subset.begin(), subset.end(), start);
  if (it == subset.end()) throw std::invalid_argument("build_tour_costs: start not in vertex subset");
  TourCosts tc;
  tc.start = static_cast<std::size_t>(it - subset.begin());
  const auto m = static_cast<Eigen::Index>(subset.size());
  tc.cost = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      if (a == b || b == static_cast<Eigen::Index>(tc.start)) continue;
      tc.cost(a, b) = mc.dist(subset[static_cast<std::size_t>(a)], subset[static_cast<std::size_t>(b)]);
    }
  }
  tc.vertices = std::move(subset);
  return tc;
}

inline TourCosts build_tour_costs(const MetricClosure& mc, VertexIndex start) {
  std::vector<VertexIndex> all(mc.size());
  std::iota(all.begin(), all.end(), VertexIndex{0});
  return build_tour_costs(mc, std::move(all), start);
}

/// Cost of visiting local indices in `order`; includes the (zero) return edge.
inline double tour_cost(const TourCosts& tc, const std::vector<std::size_t>& order) {
  double total = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) total += tc(order[k - 1], order[k]);
  if (!order.empty()) total += tc(order.back(), order.front());
  return total;
}

namespace detail {

inline std::vector<VertexIndex> to_graph_order(const TourCosts& tc, const std::vector<std::size_t>& local) {
  std::vector<VertexIndex> out;
  out.reserve(local.size());
  for (auto k : local) out.push_back(tc.vertices[k]);
  return out;
}

inline std::optional<std::size_t> local_index(const TourCosts& tc, std::optional<VertexIndex> v) {
  if (!v) return std::nullopt;
  const auto it = std::find(tc.vertices.begin(), tc.vertices.end(), *v);
  if (it == tc.vertices.end()) throw std::invalid_argument("TSP end vertex not in instance");
  return static_cast<std::size_t>(it - tc.vertices.begin());
}

inline std::vector<std::size_t> nearest_neighbor(const TourCosts& tc, std::size_t second,
                                                 std::optional<std::size_t> end) {
  const std::size_t m = tc.size();
  std::vector<char> used(m, 0);
  std::vector<std::size_t> order{tc.start};
  used[tc.start] = 1;
  if (end) used[*end] = 1;
  if (!used[second]) {
    order.push_back(second);
    used[second] = 1;
  }
  while (true) {
    const std::size_t cur = order.back();
    std::size_t best = m;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (used[c]) continue;
      if (tc(cur, c) < best_cost) {
        best_cost = tc(cur, c);
        best = c;
      }
    }
    if (best == m) break;
    order.push_back(best);
    used[best] = 1;
  }
  if (end && *end != tc.start) order.push_back(*end);
  return order;
}

/// Or-opt segment relocation plus direction-aware segment reversal, until no move improves.
inline void improve_open_path(const TourCosts& tc, std::vector<std::size_t>& p, bool fixed_end) {
  const std::size_t m = p.size();
  if (m < 3) return;
  // Positions [1, last] are movable; position 0 is the start.
  const std::size_t last = fixed_end ? m - 2 : m - 1;
  if (last < 1) return;
  constexpr double kEps = 1e-12;
  auto link = [&](std::size_t a, std::size_t b) { return tc(p[a], p[b]); };
  // Cost of the edge leaving position k (k+1 may not exist on a free end).
  auto out_cost = [&](std::size_t k) { return k + 1 < m ? link(k, k + 1) : 0.0; };

  bool improved = true;
  int guard = 0;
  while (improved && guard++ < 10000) {
    improved = false;

    // Segment reversal p[i..j]: interior reversed under asymmetric costs.
    std::vector<double> fwd(m, 0.0), bwd(m, 0.0);
    auto refresh = [&] {
      for (std::size_t k = 1; k < m; ++k) {
        fwd[k] = fwd[k - 1] + link(k - 1, k);
        bwd[k] = bwd[k - 1] + link(k, k - 1);
      }
    };
    refresh();
    for (std::size_t i = 1; i < last; ++i) {
      for (std::size_t j = i + 1; j <= last; ++j) {
        const double before = link(i - 1, i) + (fwd[j] - fwd[i]) + out_cost(j);
        const double after = tc(p[i - 1], p[j]) + (bwd[j] - bwd[i]) + (j + 1 < m ? tc(p[i], p[j + 1]) : 0.0);
        if (after < before - kEps) {
          std::reverse(p.begin() + static_cast<std::ptrdiff_t>(i), p.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          refresh();
          improved = true;
        }
      }
    }

    // Move segment p[i..i+len-1] (kept in order) to sit after position t.
    for (std::size_t len = 1; len <= 3; ++len) {
      for (std::size_t i = 1; i + len - 1 <= last; ++i) {
        const std::size_t j = i + len - 1;
        const double removed_gain =
            link(i - 1, i) + out_cost(j) - (j + 1 < m ? link(i - 1, j + 1) : 0.0);
        for (std::size_t t = 0; t <= last; ++t) {
          if (t + 1 >= i && t <= j) continue;  // inside or adjacent-before the segment
          const double insert_cost = tc(p[t], p[i]) + (t + 1 < m ? tc(p[j], p[t + 1]) : 0.0) -
                                     (t + 1 < m ? link(t, t + 1) : 0.0);
          if (insert_cost < removed_gain - kEps) {
            std::vector<std::size_t> seg(p.begin() + static_cast<std::ptrdiff_t>(i),
                                         p.begin() + static_cast<std::ptrdiff_t>(j) + 1);
            p.erase(p.begin() + static_cast<std::ptrdiff_t>(i), p.begin() + static_cast<std::ptrdiff_t>(j) + 1);
            const std::size_t at = t < i ? t + 1 : t + 1 - len;
            p.insert(p.begin() + static_cast<std::ptrdiff_t>(at), seg.begin(), seg.end());
            improved = true;
            break;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Number of nearest-neighbor restarts, each from a distinct second vertex.
inline constexpr std::size_t kTspSeeds = 8;

/*
 * Open-path heuristic: nearest-neighbor constructions from the kTspSeeds
 * second vertices closest to the start, each refined by local search; the
 * cheapest result wins (earliest seed on ties). With `end`, the path is
 * constrained to finish at that vertex.
 */
inline std::vector<VertexIndex> solve_open_tsp(const TourCosts& tc, std::optional<VertexIndex> end = std::nullopt) {
  const std::size_t m = tc.size();
  if (m == 0) throw std::invalid_argument("solve_open_tsp: empty instance");
  const auto end_local = detail::local_index(tc, end);
  if (m == 1) return {tc.vertices[tc.start]};

  std::vector<std::size_t> seconds;
  for (std::size_t c = 0; c < m; ++c) {
    if (c != tc.start && (!end_local || c != *end_local)) seconds.push_back(c);
  }
  if (seconds.empty()) {
    return detail::to_graph_order(tc, {tc.start, *end_local});
  }
  std::stable_sort(seconds.begin(), seconds.end(),
                   [&](std::size_t a, std::size_t b) { return tc(tc.start, a) < tc(tc.start, b); });
  if (seconds.size() > kTspSeeds) seconds.resize(kTspSeeds);

  std::vector<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto second : seconds) {
    auto order = detail::nearest_neighbor(tc, second, end_local);
    detail::improve_open_path(tc, order, end_local.has_value());
    const double c = tour_cost(tc, order);
    if (c < best_cost - 1e-12) {
      best_cost = c;
      best = std::move(order);
    }
  }
  return detail::to_graph_order(tc, best);
}

/// Largest instance the Held-Karp solver accepts.
inline constexpr std::size_t kExactTspLimit = 14;

/// Held-Karp dynamic program; provably minimal open path from the start.
inline std::vector<VertexIndex> solve_open_tsp_exact(const TourCosts& tc,
                                                     std::optional<VertexIndex> end = std::nullopt) {
  const std::size_t m = tc.size();
  if (m == 0) throw std::invalid_argument("solve_open_tsp_exact: empty instance");
  if (m > kExactTspLimit) {
    throw SizeError("solve_open_tsp_exact: " + std::to_string(m) + " vertices exceeds limit of " +
                    std::to_string(kExactTspLimit));
  }
  const auto end_local = detail::local_index(tc, end);
  if (m == 1) return {tc.vertices[tc.start]};

  // Bit b of a mask refers to others[b].
  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < m; ++c) {
    if (c != tc.start) others.push_back(c);
  }
  const std::size_t k = others.size();
  const std::size_t full = (std::size_t{1} << k) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * k, kInf);
  std::vector<int> parent((full + 1) * k, -1);
  auto at = [k](std::size_t mask, std::size_t last) { return mask * k + last; };
  for (std::size_t b = 0; b < k; ++b) dp[at(std::size_t{1} << b, b)] = tc(tc.start, others[b]);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (std::size_t last = 0; last < k; ++last) {
      if (!(mask >> last & 1U)) continue;
      const double cur = dp[at(mask, last)];
      if (cur == kInf) continue;
      for (std::size_t nxt = 0; nxt < k; ++nxt) {
        if (mask >> nxt & 1U) continue;
        const std::size_t nm = mask | (std::size_t{1} << nxt);
        const double cand = cur + tc(others[last], others[nxt]);
        if (cand < dp[at(nm, nxt)]) {
          dp[at(nm, nxt)] = cand;
          parent[at(nm, nxt)] = static_cast<int>(last);
        }
      }
    }
  }
  std::size_t best_last = 0;
  double best_cost = kInf;
  for (std::size_t last = 0; last < k; ++last) {
    if (end_local && others[last] != *end_local) continue;
    if (dp[at(full, last)] < best_cost) {
      best_cost = dp[at(full, last)];
      best_last = last;
    }
  }
  std::vector<std::size_t> rev;
  std::size_t mask = full;
  int last = static_cast<int>(best_last);
  while (last >= 0) {
    rev.push_back(others[static_cast<std::size_t>(last)]);
    const int prev = parent[at(mask, static_cast<std::size_t>(last))];
    mask &= ~(std::size_t{1} << static_cast<std::size_t>(last));
    last = prev;
  }
  rev.push_back(tc.start);
  std::reverse(rev.begin(), rev.end());
  return detail::to_graph_order(tc, rev);
}

/// Open path length of a graph-vertex order under the (symmetric) metric closure.
inline double open_path_cost(const MetricClosure& mc, const std::vector<VertexIndex>& order) {
  double total = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) total += mc.dist(order[k - 1], order[k]);
  return total;
}

/// Joins consecutive order entries by their stored shortest paths.
inline Walk expand_to_walk(const std::vector<VertexIndex>& order, const MetricClosure& mc, const PriorGraph& g) {
  std::vector<VertexIndex> seq;
  if (order.empty()) return {};
  seq.push_back(order.front());
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto path = mc.path(order[k - 1], order[k]);
    seq.insert(seq.end(), path.begin() + 1, path.end());
  }
  return make_walk(g, std::move(seq));
}

}  // namespace slamplan
