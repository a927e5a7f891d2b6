#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "slamplan/prior_graph.hpp"

namespace slamplan {

/*
 * Random prior graph built from a regular grid: one vertex per cell, edges
 * between 4-neighbours, then random vertex and edge removal and Gaussian
 * jitter of the positions. Edge lengths are Euclidean over the jittered
 * positions.
 */
struct GridGraphSpec {
  double width = 10.0;   // meters
  double height = 10.0;  // meters
  double cell = 1.0;     // meters
  double vertex_removal = 0.05;
  double edge_removal = 0.05;
  double position_noise_sigma = 0.2;  // meters
  std::uint64_t seed = 1;
};

inline constexpr int kGridResampleAttempts = 1000;

inline GridGraphSpec grid_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("grid spec: top level must be an object");
  GridGraphSpec s;
  for (const auto& [key, value] : doc.items()) {
    const std::string where = "grid spec '" + key + "'";
    if (key == "seed") {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
        throw ParseError(where + ": expected a non-negative integer");
      }
      s.seed = value.get<std::uint64_t>();
      continue;
    }
    if (key == "seeds") continue;  // consumed by callers that sweep seeds
    if (!value.is_number()) throw ParseError(where + ": expected a number");
    const double x = value.get<double>();
    if (key == "width") s.width = x;
    else if (key == "height") s.height = x;
    else if (key == "cell") s.cell = x;
    else if (key == "vertex_removal") s.vertex_removal = x;
    else if (key == "edge_removal") s.edge_removal = x;
    else if (key == "position_noise_sigma") s.position_noise_sigma = x;
    else throw ParseError("grid spec: unknown key '" + key + "'");
  }
  return s;
}

inline nlohmann::json to_json(const GridGraphSpec& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"cell", s.cell},
          {"vertex_removal", s.vertex_removal},
          {"edge_removal", s.edge_removal},
          {"position_noise_sigma", s.position_noise_sigma},
          {"seed", s.seed}};
}

/// True when the document looks like a grid spec rather than a prior graph.
inline bool is_grid_spec(const nlohmann::json& doc) {
  return doc.is_object() && !doc.contains("vertices") && (doc.contains("width") || doc.contains("height"));
}

namespace detail {

inline bool connected_subgraph(std::size_t n, const std::vector<char>& alive,
                               const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = 0;
  for (std::size_t v = 0; v < n; ++v) components += alive[v] ? 1 : 0;
  for (const auto& [u, v] : edges) {
    const std::size_t a = find(u), b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

}  // namespace detail

inline PriorGraph gen_grid_graph(const GridGraphSpec& spec) {
  if (!(spec.cell > 0.0)) throw GraphError("grid spec: cell must be positive");
  const long nx = std::lround(spec.width / spec.cell), ny = std::lround(spec.height / spec.cell);
  if (nx < 2 || ny < 2) throw GraphError("grid spec: needs at least 2 x 2 cells");
  if (!(spec.vertex_removal >= 0.0 && spec.vertex_removal < 1.0) ||
      !(spec.edge_removal >= 0.0 && spec.edge_removal < 1.0)) {
    throw GraphError("grid spec: removal fractions must lie in [0, 1)");
  }
  if (!(spec.position_noise_sigma >= 0.0)) throw GraphError("grid spec: position_noise_sigma must be non-negative");

  const std::size_t n = static_cast<std::size_t>(nx * ny);
  auto cell_index = [&](long x, long y) { return static_cast<std::size_t>(y * nx + x); };
  std::vector<std::pair<std::size_t, std::size_t>> grid_edges;
  for (long y = 0; y < ny; ++y) {
    for (long x = 0; x < nx; ++x) {
      if (x + 1 < nx) grid_edges.emplace_back(cell_index(x, y), cell_index(x + 1, y));
      if (y + 1 < ny) grid_edges.emplace_back(cell_index(x, y), cell_index(x, y + 1));
    }
  }
  const auto drop_vertices = static_cast<std::size_t>(std::lround(spec.vertex_removal * static_cast<double>(n)));

  std::mt19937_64 rng(spec.seed);
  for (int attempt = 0; attempt < kGridResampleAttempts; ++attempt) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> alive(n, 1);
    for (std::size_t k = 0; k < drop_vertices; ++k) alive[order[k]] = 0;

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : grid_edges) {
      if (alive[e.first] && alive[e.second]) edges.push_back(e);
    }
    std::shuffle(edges.begin(), edges.end(), rng);
    const auto drop_edges =
        static_cast<std::size_t>(std::lround(spec.edge_removal * static_cast<double>(edges.size())));
    edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(drop_edges));
    if (!detail::connected_subgraph(n, alive, edges)) continue;
    std::sort(edges.begin(), edges.end());

    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::size_t> new_index(n, kNoVertex);
    std::vector<Vertex> vertices;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      new_index[v] = vertices.size();
      const double x = static_cast<double>(static_cast<long>(v) % nx) * spec.cell;
      const double y = static_cast<double>(static_cast<long>(v) / nx) * spec.cell;
      const double dx = spec.position_noise_sigma * noise(rng);
      const double dy = spec.position_noise_sigma * noise(rng);
      vertices.push_back({std::to_string(vertices.size()), Point2(x + dx, y + dy)});
    }
    std::vector<EdgeInput> inputs;
    for (const auto& [u, v] : edges) {
      EdgeInput e;
      e.u = new_index[u];
      e.v = new_index[v];
      // Jitter can pull neighbours arbitrarily close; keep lengths positive.
      e.length = std::max(1e-3, (vertices[e.u].position - vertices[e.v].position).norm());
      inputs.push_back(e);
    }
    PriorGraph g(std::move(vertices), inputs, 0);
    g.set_numeric_ids(true);
    return g;
  }
  throw GraphError("grid spec: no connected graph after " + std::to_string(kGridResampleAttempts) + " attempts");
}

}  // namespace slamplan
