#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slamplan/covariance.hpp"
#include "slamplan/errors.hpp"

namespace slamplan {

using VertexIndex = std::size_t;
using EdgeIndex = std::size_t;

inline constexpr VertexIndex kNoVertex = std::numeric_limits<VertexIndex>::max();

struct Vertex {
  std::string id;
  Point2 position = Point2::Zero();
};

struct Edge {
  VertexIndex u = 0;
  VertexIndex v = 0;
  double length = 0.0;  // meters
  Matrix3 covariance = default_edge_covariance();

  VertexIndex other(VertexIndex w) const { return w == u ? v : u; }
};

/// Edge description before validation. A missing length means "Euclidean distance".
struct EdgeInput {
  VertexIndex u = 0;
  VertexIndex v = 0;
  std::optional<double> length;
  std::optional<Matrix3> covariance;
};

/*
 * Prior topo-metric graph: one vertex per region to explore, one edge per
 * known traversable connection. Undirected, simple, connected from the
 * start vertex, with an SPD covariance on every edge.
 *
 * Instances are values. Online updates (new edges, region degeneracy) return
 * a modified copy with an incremented revision.
 */
class PriorGraph {
 public:
  PriorGraph() = default;

  PriorGraph(std::vector<Vertex> vertices, const std::vector<EdgeInput>& edges, VertexIndex start)
      : vertices_(std::move(vertices)), start_(start) {
    if (vertices_.empty()) throw GraphError("prior graph has no vertices");
    if (start_ >= vertices_.size()) throw GraphError("start vertex index out of range");
    std::unordered_map<std::string, VertexIndex> seen;
    for (VertexIndex i = 0; i < vertices_.size(); ++i) {
      if (!seen.emplace(vertices_[i].id, i).second) {
        throw GraphError("duplicate vertex id '" + vertices_[i].id + "'");
      }
      if (!vertices_[i].position.allFinite()) {
        throw GraphError("vertex '" + vertices_[i].id + "' has a non-finite position");
      }
    }
    adjacency_.assign(vertices_.size(), {});
    region_covariance_.assign(vertices_.size(), default_edge_covariance());
    for (const auto& e : edges) insert_edge(e);
    check_connected();
  }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  VertexIndex start() const { return start_; }
  const Vertex& vertex(VertexIndex v) const { return vertices_.at(v); }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& id(VertexIndex v) const { return vertices_.at(v).id; }
  const Point2& position(VertexIndex v) const { return vertices_.at(v).position; }

  /// (neighbor, edge index) pairs, sorted by neighbor index.
  const std::vector<std::pair<VertexIndex, EdgeIndex>>& neighbors(VertexIndex v) const {
    return adjacency_.at(v);
  }

  std::optional<EdgeIndex> find_edge(VertexIndex a, VertexIndex b) const {
    for (const auto& [w, e] : adjacency_.at(a)) {
      if (w == b) return e;
    }
    return std::nullopt;
  }
  bool adjacent(VertexIndex a, VertexIndex b) const { return find_edge(a, b).has_value(); }

  std::optional<VertexIndex> index_of(const std::string& id) const {
    for (VertexIndex i = 0; i < vertices_.size(); ++i) {
      if (vertices_[i].id == id) return i;
    }
    return std::nullopt;
  }

  double euclidean(VertexIndex a, VertexIndex b) const {
    return (position(a) - position(b)).norm();
  }

  /// Degeneracy matrix of a region; starts at the default edge covariance.
  const Matrix3& region_covariance(VertexIndex v) const { return region_covariance_.at(v); }

  /// Bumped by every online update; metric closures remember the revision they were built from.
  std::uint64_t revision() const { return revision_; }

  /// True when every id is a canonical decimal integer; documents then echo ids as numbers.
  bool numeric_ids() const { return numeric_ids_; }
  void set_numeric_ids(bool numeric) { numeric_ids_ = numeric; }

  PriorGraph with_added_edge(const EdgeInput& e) const {
    PriorGraph copy = *this;
    copy.insert_edge(e);
    ++copy.revision_;
    return copy;
  }

  /// Replaces region matrices and resets every edge covariance to the mean of its endpoint regions.
  PriorGraph with_region_covariances(std::vector<Matrix3> regions) const {
    if (regions.size() != vertices_.size()) throw GraphError("region covariance count mismatch");
    PriorGraph copy = *this;
    for (VertexIndex v = 0; v < regions.size(); ++v) {
      if (!is_spd(regions[v])) throw GraphError("region '" + id(v) + "' covariance is not SPD");
    }
    copy.region_covariance_ = std::move(regions);
    for (auto& e : copy.edges_) {
      e.covariance = 0.5 * (copy.region_covariance_[e.u] + copy.region_covariance_[e.v]);
    }
    ++copy.revision_;
    return copy;
  }

 private:
  void insert_edge(const EdgeInput& in) {
    const auto n = vertices_.size();
    if (in.u >= n || in.v >= n) throw GraphError("edge endpoint out of range");
    const std::string label = "edge (" + vertices_[in.u].id + ", " + vertices_[in.v].id + ")";
    if (in.u == in.v) throw GraphError(label + " is a self-loop");
    if (find_edge(in.u, in.v)) throw GraphError(label + " is a duplicate");
    Edge e;
    e.u = in.u;
    e.v = in.v;
    e.length = in.length.value_or(euclidean(in.u, in.v));
    if (!(e.length > 0.0) || !std::isfinite(e.length)) {
      throw GraphError(label + " has non-positive length");
    }
    if (in.covariance) e.covariance = *in.covariance;
    if (!is_spd(e.covariance)) throw GraphError(label + " covariance is not symmetric positive-definite");
    const EdgeIndex idx = edges_.size();
    edges_.push_back(e);
    auto place = [&](VertexIndex a, VertexIndex b) {
      auto& adj = adjacency_[a];
      auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(b, EdgeIndex{0}));
      adj.insert(it, {b, idx});
    };
    place(e.u, e.v);
    place(e.v, e.u);
  }

  void check_connected() const {
    std::vector<char> reached(vertices_.size(), 0);
    std::queue<VertexIndex> frontier;
    frontier.push(start_);
    reached[start_] = 1;
    while (!frontier.empty()) {
      const VertexIndex v = frontier.front();
      frontier.pop();
      for (const auto& [w, e] : adjacency_[v]) {
        if (!reached[w]) {
          reached[w] = 1;
          frontier.push(w);
        }
      }
    }
    for (VertexIndex v = 0; v < vertices_.size(); ++v) {
      if (!reached[v]) {
        throw GraphError("prior graph is disconnected: vertex '" + vertices_[v].id +
                         "' is unreachable from start '" + vertices_[start_].id + "'");
      }
    }
  }

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<VertexIndex, EdgeIndex>>> adjacency_;
  std::vector<Matrix3> region_covariance_;
  VertexIndex start_ = 0;
  std::uint64_t revision_ = 0;
  bool numeric_ids_ = false;
};

// ---------------------------------------------------------------------------
// Document I/O
// ---------------------------------------------------------------------------

namespace detail {

inline std::string id_from_json(const nlohmann::json& j, const std::string& where, bool& numeric) {
  if (j.is_string()) {
    numeric = false;
    return j.get<std::string>();
  }
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw ParseError(where + ": id must be a string or an integer");
}

inline double number_at(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline std::array<double, 3> sigma_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": sigma must be an array of 3 numbers");
  std::array<double, 3> s{};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ParseError(where + ": sigma entries must be numbers");
    s[k] = j[k].get<double>();
  }
  return s;
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline nlohmann::json read_json_file(const std::string& path) {
  return detail::parse_json_text(detail::read_text_file(path), path);
}

/// Builds a PriorGraph from a document `{vertices:[{id,x,y}], edges:[{u,v,length?,sigma?}], start}`.
inline PriorGraph load_prior_graph(const nlohmann::json& doc,
                                   CovarianceEntries mode = CovarianceEntries::kVariance) {
  if (!doc.is_object()) throw ParseError("prior graph document must be an object");
  if (!doc.contains("vertices") || !doc.at("vertices").is_array()) {
    throw ParseError("prior graph document: 'vertices' must be an array");
  }
  if (!doc.contains("edges") || !doc.at("edges").is_array()) {
    throw ParseError("prior graph document: 'edges' must be an array");
  }
  if (!doc.contains("start")) throw ParseError("prior graph document: missing 'start'");

  bool numeric = true;
  std::vector<Vertex> vertices;
  std::unordered_map<std::string, VertexIndex> index;
  for (std::size_t k = 0; k < doc.at("vertices").size(); ++k) {
    const auto& jv = doc.at("vertices")[k];
    const std::string where = "vertices[" + std::to_string(k) + "]";
    if (!jv.is_object() || !jv.contains("id")) throw ParseError(where + ": missing 'id'");
    Vertex v;
    v.id = detail::id_from_json(jv.at("id"), where, numeric);
    v.position = Point2(detail::number_at(jv, "x", where), detail::number_at(jv, "y", where));
    if (!index.emplace(v.id, vertices.size()).second) {
      throw GraphError(where + ": duplicate vertex id '" + v.id + "'");
    }
    vertices.push_back(std::move(v));
  }

  auto lookup = [&](const nlohmann::json& j, const std::string& where) {
    bool ignored = true;
    const std::string id = detail::id_from_json(j, where, ignored);
    const auto it = index.find(id);
    if (it == index.end()) throw GraphError(where + ": unknown vertex id '" + id + "'");
    return it->second;
  };

  std::vector<EdgeInput> edges;
  for (std::size_t k = 0; k < doc.at("edges").size(); ++k) {
    const auto& je = doc.at("edges")[k];
    const std::string where = "edges[" + std::to_string(k) + "]";
    if (!je.is_object() || !je.contains("u") || !je.contains("v")) {
      throw ParseError(where + ": edges need 'u' and 'v'");
    }
    EdgeInput e;
    e.u = lookup(je.at("u"), where);
    e.v = lookup(je.at("v"), where);
    if (je.contains("length") && !je.at("length").is_null()) e.length = detail::number_at(je, "length", where);
    if (je.contains("sigma") && !je.at("sigma").is_null()) {
      e.covariance = diagonal_covariance(detail::sigma_from_json(je.at("sigma"), where), mode);
      if (!is_spd(*e.covariance)) {
        throw GraphError(where + ": covariance of edge (" + vertices[e.u].id + ", " + vertices[e.v].id +
                         ") is not symmetric positive-definite");
      }
    }
    edges.push_back(e);
  }

  bool ignored = true;
  const std::string start_id = detail::id_from_json(doc.at("start"), "start", ignored);
  const auto sit = index.find(start_id);
  if (sit == index.end()) throw GraphError("start: unknown vertex id '" + start_id + "'");

  PriorGraph g(std::move(vertices), edges, sit->second);
  g.set_numeric_ids(numeric);
  return g;
}

inline PriorGraph load_prior_graph_file(const std::string& path,
                                        CovarianceEntries mode = CovarianceEntries::kVariance) {
  return load_prior_graph(read_json_file(path), mode);
}

/// JSON value for a vertex id, numeric when the graph was loaded with integer ids.
inline nlohmann::json id_json(const PriorGraph& g, VertexIndex v) {
  if (g.numeric_ids()) return std::stoll(g.id(v));
  return g.id(v);
}

/// Serializes with variance-mode sigma (diagonal entries of each covariance).
inline nlohmann::json to_json(const PriorGraph& g) {
  nlohmann::json doc;
  doc["start"] = id_json(g, g.start());
  doc["vertices"] = nlohmann::json::array();
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    doc["vertices"].push_back({{"id", id_json(g, v)}, {"x", g.position(v).x()}, {"y", g.position(v).y()}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges()) {
    doc["edges"].push_back({{"u", id_json(g, e.u)},
                            {"v", id_json(g, e.v)},
                            {"length", e.length},
                            {"sigma", {e.covariance(0, 0), e.covariance(1, 1), e.covariance(2, 2)}}});
  }
  return doc;
}

}  // namespace slamplan
