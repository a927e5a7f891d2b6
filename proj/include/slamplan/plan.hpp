#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "slamplan/loop_selector.hpp"
#include "slamplan/tsp.hpp"

namespace slamplan {

/// A loop-closing detour: after first covering `anchor`, go to `target` and come back.
struct LoopAction {
  VertexIndex anchor = 0;
  VertexIndex target = 0;
  double omega = 0.0;
  double gamma = 0.0;
  PoseIndex anchor_pose = 0;
  PoseIndex target_pose = 0;
};

struct Plan {
  Walk walk;                               // expanded walk with every detour inserted
  Walk tsp_walk;                           // the coverage walk before insertion
  std::vector<LoopAction> actions;         // in execution order
  std::vector<LoopEdgeCandidate> selected; // in greedy selection order
  double objective = 0.0;                  // J of the selection
  double base_distance = 0.0;              // D_tsp + 2 sum omega
  double d_tsp = 0.0;
  bool assumption_ok = true;               // base_distance <= 2 d_tsp
};

/*
 * Applies the insertion rule: the first occurrence of each anchor vertex in
 * the walk is followed by shortest paths anchor -> target -> anchor. Actions
 * sharing an anchor run in increasing omega order, then by (i, j).
 */
inline Plan insert_loop_edges(const Walk& walk, const std::vector<LoopEdgeCandidate>& selected,
                              const AbstractedPoseGraph& apg, const MetricClosure& mc, const PriorGraph& g) {
  Plan plan;
  plan.tsp_walk = walk;
  plan.selected = selected;
  plan.d_tsp = walk.total_length;

  std::vector<std::size_t> first_pos(g.vertex_count(), walk.size());
  for (std::size_t k = 0; k < walk.size(); ++k) {
    if (first_pos[walk.sequence[k]] == walk.size()) first_pos[walk.sequence[k]] = k;
  }

  struct Keyed {
    std::size_t pos;
    LoopEdgeCandidate c;
  };
  std::vector<Keyed> keyed;
  double extra = 0.0;
  for (const auto& c : selected) {
    const VertexIndex anchor = apg.pose_to_vertex.at(c.i);
    if (first_pos[anchor] == walk.size()) {
      throw GraphError("insert_loop_edges: anchor vertex '" + g.id(anchor) + "' does not appear in the walk");
    }
    keyed.push_back({first_pos[anchor], c});
    extra += 2.0 * c.omega;
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    if (a.c.omega != b.c.omega) return a.c.omega < b.c.omega;
    return std::tie(a.c.i, a.c.j) < std::tie(b.c.i, b.c.j);
  });

  std::vector<VertexIndex> seq;
  std::size_t next = 0;
  for (std::size_t k = 0; k < walk.size(); ++k) {
    seq.push_back(walk.sequence[k]);
    for (; next < keyed.size() && keyed[next].pos == k; ++next) {
      const auto& c = keyed[next].c;
      const VertexIndex anchor = apg.pose_to_vertex[c.i], target = apg.pose_to_vertex[c.j];
      const auto out = mc.path(anchor, target);
      const auto back = mc.path(target, anchor);
      seq.insert(seq.end(), out.begin() + 1, out.end());
      seq.insert(seq.end(), back.begin() + 1, back.end());
      plan.actions.push_back({anchor, target, c.omega, c.gamma, c.i, c.j});
    }
  }
  plan.walk = make_walk(g, std::move(seq));
  plan.base_distance = plan.d_tsp + extra;
  plan.assumption_ok = plan.base_distance <= 2.0 * plan.d_tsp;
  return plan;
}

enum class Strategy { kTspOnly, kSlamAware };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "tsp_only") return Strategy::kTspOnly;
  if (s == "slam_aware") return Strategy::kSlamAware;
  throw ParseError("strategy must be 'tsp_only' or 'slam_aware', got '" + s + "'");
}

inline std::string to_string(Strategy s) { return s == Strategy::kTspOnly ? "tsp_only" : "slam_aware"; }

struct PlannerOptions {
  Strategy strategy = Strategy::kSlamAware;
  bool prune = true;
};

/// Loop selection over an already expanded coverage walk.
inline Plan plan_from_walk(const PriorGraph& g, const MetricClosure& mc, const Walk& tsp_walk,
                           const PlannerOptions& opt = {}) {
  const AbstractedPoseGraph apg = abstract_pose_graph(tsp_walk, g);
  if (apg.n() == 0 || !(tsp_walk.total_length > 0.0)) {
    Plan p = insert_loop_edges(tsp_walk, {}, apg, mc, g);
    p.objective = 0.0;
    return p;
  }
  std::vector<LoopEdgeCandidate> selected;
  double log_j = log_objective(apg.factor, tsp_walk.total_length);
  if (opt.strategy == Strategy::kSlamAware) {
    GreedyResult gr = greedy_select(apg, enumerate_candidates(apg, mc, g), tsp_walk.total_length, {opt.prune});
    selected = std::move(gr.selected);
    log_j = gr.log_objective.back();
  }
  Plan p = insert_loop_edges(tsp_walk, selected, apg, mc, g);
  p.objective = std::exp(log_j);
  return p;
}

/// Two-stage planner: open TSP from the start, then greedy loop-edge selection.
inline Plan plan_exploration(const PriorGraph& g, const MetricClosure& mc, const PlannerOptions& opt = {}) {
  const TourCosts tc = build_tour_costs(mc, g.start());
  const Walk tsp_walk = expand_to_walk(solve_open_tsp(tc), mc, g);
  return plan_from_walk(g, mc, tsp_walk, opt);
}

inline Plan plan_exploration(const PriorGraph& g, const PlannerOptions& opt = {}) {
  return plan_exploration(g, MetricClosure(g), opt);
}

// ---------------------------------------------------------------------------
// Plan document
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Plan& p, const PriorGraph& g) {
  nlohmann::json doc;
  doc["walk"] = nlohmann::json::array();
  for (auto v : p.walk.sequence) doc["walk"].push_back(id_json(g, v));
  doc["actions"] = nlohmann::json::array();
  for (const auto& a : p.actions) {
    doc["actions"].push_back(
        {{"anchor", id_json(g, a.anchor)}, {"target", id_json(g, a.target)}, {"omega", a.omega}, {"gamma", a.gamma}});
  }
  doc["objective"] = p.objective;
  doc["base_distance"] = p.base_distance;
  doc["d_tsp"] = p.d_tsp;
  doc["assumption_ok"] = p.assumption_ok;
  return doc;
}

/// Reads a plan document back against the graph it was made for.
inline Plan plan_from_json(const nlohmann::json& doc, const PriorGraph& g) {
  auto vertex = [&](const nlohmann::json& j, const std::string& where) {
    bool ignored = true;
    const std::string id = detail::id_from_json(j, where, ignored);
    const auto v = g.index_of(id);
    if (!v) throw GraphError(where + ": unknown vertex id '" + id + "'");
    return *v;
  };
  if (!doc.is_object() || !doc.contains("walk") || !doc.at("walk").is_array()) {
    throw ParseError("plan document: 'walk' must be an array");
  }
  Plan p;
  std::vector<VertexIndex> seq;
  for (std::size_t k = 0; k < doc.at("walk").size(); ++k) {
    seq.push_back(vertex(doc.at("walk")[k], "walk[" + std::to_string(k) + "]"));
  }
  p.walk = make_walk(g, std::move(seq));
  if (doc.contains("actions")) {
    for (std::size_t k = 0; k < doc.at("actions").size(); ++k) {
      const auto& ja = doc.at("actions")[k];
      const std::string where = "actions[" + std::to_string(k) + "]";
      LoopAction a;
      a.anchor = vertex(ja.at("anchor"), where);
      a.target = vertex(ja.at("target"), where);
      a.omega = ja.value("omega", 0.0);
      a.gamma = ja.value("gamma", 0.0);
      p.actions.push_back(a);
    }
  }
  p.objective = doc.value("objective", 0.0);
  p.base_distance = doc.value("base_distance", p.walk.total_length);
  p.d_tsp = doc.value("d_tsp", p.walk.total_length);
  p.assumption_ok = doc.value("assumption_ok", true);
  p.tsp_walk = p.walk;
  return p;
}

}  // namespace slamplan
