#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "slamplan/prior_graph.hpp"

namespace slamplan {

/*
 * Ground truth the simulator measures against: the prior graph plus edges
 * the prior does not list, the true degeneracy of every region, and the
 * loop-closure measurement covariance. Vertex indices match the prior graph.
 */
struct WorldModel {
  PriorGraph true_graph;
  std::vector<EdgeInput> hidden_edges;    // edges of true_graph absent from the prior
  std::vector<Matrix3> region_degeneracy; // per vertex
  Matrix3 loop_closure_covariance = diagonal_covariance({0.01, 0.01, 0.0001});
  double noise_scale = 1.0;               // 0 gives noiseless measurements

  /// Odometry covariance between two regions: the mean of their degeneracy matrices.
  Matrix3 odometry_covariance(VertexIndex a, VertexIndex b) const {
    return 0.5 * (region_degeneracy.at(a) + region_degeneracy.at(b));
  }
};

/// World with no hidden edges and the default edge covariance everywhere.
inline WorldModel world_from_prior(const PriorGraph& prior) {
  WorldModel w;
  w.true_graph = prior;
  w.region_degeneracy.assign(prior.vertex_count(), default_edge_covariance());
  return w;
}

/// Checks that `prior` can be explored inside `world`: same vertices, prior edges a subset.
inline void check_world_consistency(const PriorGraph& prior, const WorldModel& world) {
  const PriorGraph& t = world.true_graph;
  if (t.vertex_count() != prior.vertex_count()) {
    throw GraphError("world has " + std::to_string(t.vertex_count()) + " vertices, prior has " +
                     std::to_string(prior.vertex_count()));
  }
  for (VertexIndex v = 0; v < prior.vertex_count(); ++v) {
    if (t.id(v) != prior.id(v)) throw GraphError("world vertex " + std::to_string(v) + " is '" + t.id(v) +
                                                 "', prior has '" + prior.id(v) + "'");
  }
  if (t.start() != prior.start()) throw GraphError("world and prior disagree on the start vertex");
  for (const auto& e : prior.edges()) {
    if (!t.adjacent(e.u, e.v)) {
      throw GraphError("prior edge (" + prior.id(e.u) + ", " + prior.id(e.v) + ") does not exist in the world");
    }
  }
  if (world.region_degeneracy.size() != t.vertex_count()) throw GraphError("world degeneracy count mismatch");
}

/*
 * World document, read against the prior graph it extends:
 *   {"hidden_edges": [{"u", "v", "length"?}], "degeneracy": {"default": [s1, s2, s3],
 *    "regions": {"<id>": [s1, s2, s3]}}, "loop_closure_sigma": [s1, s2, s3], "noise_scale": 1.0}
 * Every key is optional. Sigma entries follow `mode`.
 */
inline WorldModel load_world(const nlohmann::json& doc, const PriorGraph& prior,
                             CovarianceEntries mode = CovarianceEntries::kVariance) {
  if (!doc.is_object()) throw ParseError("world document: top level must be an object");
  WorldModel w;
  auto vertex = [&](const nlohmann::json& j, const std::string& where) {
    bool ignored = true;
    const std::string id = detail::id_from_json(j, where, ignored);
    const auto v = prior.index_of(id);
    if (!v) throw GraphError(where + ": unknown vertex id '" + id + "'");
    return *v;
  };
  PriorGraph t = prior;
  if (doc.contains("hidden_edges")) {
    const auto& list = doc.at("hidden_edges");
    if (!list.is_array()) throw ParseError("world document: 'hidden_edges' must be an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string where = "hidden_edges[" + std::to_string(k) + "]";
      const auto& je = list[k];
      if (!je.is_object() || !je.contains("u") || !je.contains("v")) throw ParseError(where + ": needs 'u' and 'v'");
      EdgeInput e;
      e.u = vertex(je.at("u"), where + ".u");
      e.v = vertex(je.at("v"), where + ".v");
      if (je.contains("length")) e.length = detail::number_at(je, "length", where);
      if (prior.adjacent(e.u, e.v)) throw GraphError(where + ": edge already in the prior graph");
      try {
        t = t.with_added_edge(e);
      } catch (const GraphError& err) {
        throw GraphError(where + ": " + err.what());
      }
      w.hidden_edges.push_back(e);
    }
  }
  w.true_graph = t;
  Matrix3 base = default_edge_covariance();
  w.region_degeneracy.assign(prior.vertex_count(), base);
  if (doc.contains("degeneracy")) {
    const auto& d = doc.at("degeneracy");
    if (d.contains("default")) {
      base = diagonal_covariance(detail::sigma_from_json(d.at("default"), "degeneracy.default"), mode);
      w.region_degeneracy.assign(prior.vertex_count(), base);
    }
    if (d.contains("regions")) {
      for (const auto& [id, sigma] : d.at("regions").items()) {
        const auto v = prior.index_of(id);
        if (!v) throw GraphError("degeneracy.regions: unknown vertex id '" + id + "'");
        w.region_degeneracy[*v] = diagonal_covariance(detail::sigma_from_json(sigma, "degeneracy.regions." + id), mode);
      }
    }
  }
  for (VertexIndex v = 0; v < w.region_degeneracy.size(); ++v) {
    if (!is_spd(w.region_degeneracy[v])) throw GraphError("degeneracy of '" + prior.id(v) + "' is not SPD");
  }
  if (doc.contains("loop_closure_sigma")) {
    w.loop_closure_covariance = diagonal_covariance(detail::sigma_from_json(doc.at("loop_closure_sigma"), "loop_closure_sigma"), mode);
    if (!is_spd(w.loop_closure_covariance)) throw GraphError("loop_closure_sigma is not SPD");
  }
  if (doc.contains("noise_scale")) {
    w.noise_scale = detail::number_at(doc, "noise_scale", "world");
    if (!(w.noise_scale >= 0.0)) throw GraphError("noise_scale must be non-negative");
  }
  return w;
}

inline WorldModel load_world_file(const std::string& path, const PriorGraph& prior,
                                  CovarianceEntries mode = CovarianceEntries::kVariance) {
  return load_world(read_json_file(path), prior, mode);
}

}  // namespace slamplan
