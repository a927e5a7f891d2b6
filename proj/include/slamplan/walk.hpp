#pragma once

#include <string>
#include <vector>

#include "slamplan/prior_graph.hpp"

namespace slamplan {

/// Vertex sequence whose consecutive entries are adjacent in a PriorGraph.
struct Walk {
  std::vector<VertexIndex> sequence;
  double total_length = 0.0;

  bool empty() const { return sequence.empty(); }
  std::size_t size() const { return sequence.size(); }
  VertexIndex front() const { return sequence.front(); }
  VertexIndex back() const { return sequence.back(); }
};

/// Sum of edge lengths along `seq`; throws GraphError on a non-adjacent step.
inline double walk_length(const PriorGraph& g, const std::vector<VertexIndex>& seq) {
  double total = 0.0;
  for (std::size_t k = 1; k < seq.size(); ++k) {
    const auto e = g.find_edge(seq[k - 1], seq[k]);
    if (!e) {
      throw GraphError("walk step " + std::to_string(k) + " (" + g.id(seq[k - 1]) + " -> " + g.id(seq[k]) +
                       ") is not an edge of the graph");
    }
    total += g.edge(*e).length;
  }
  return total;
}

inline Walk make_walk(const PriorGraph& g, std::vector<VertexIndex> seq) {
  Walk w;
  w.total_length = walk_length(g, seq);
  w.sequence = std::move(seq);
  return w;
}

}  // namespace slamplan
