#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slamplan/plan.hpp"
#include "slamplan/pose_graph.hpp"
#include "slamplan/world.hpp"

namespace slamplan {

struct MissionConfig {
  std::vector<std::uint64_t> seeds{1};
  std::size_t degeneracy_window = 5;
  CovarianceEntries covariance_entries = CovarianceEntries::kVariance;
  double vicinity_radius = 0.5;  // arrival is exact in graph-world execution; kept for config compatibility
  bool replanning = true;
  bool subpath_optimization = true;
  Strategy strategy = Strategy::kSlamAware;
  bool prune = true;
  bool fim_half = true;
  OptimizerOptions optimizer;
};

/// Environment variable naming the default mission config file.
inline constexpr const char* kConfigEnvVar = "SLAMPLAN_CONFIG";

inline MissionConfig mission_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("mission config: top level must be an object");
  MissionConfig c;
  for (const auto& [key, value] : doc.items()) {
    const std::string where = "mission config '" + key + "'";
    auto need = [&](bool ok, const char* what) {
      if (!ok) throw ParseError(where + ": expected " + what);
    };
    if (key == "seeds") {
      need(value.is_array() && !value.empty(), "a non-empty array of non-negative integers");
      c.seeds.clear();
      for (const auto& s : value) {
        need(s.is_number_integer() && s.get<std::int64_t>() >= 0, "a non-empty array of non-negative integers");
        c.seeds.push_back(s.get<std::uint64_t>());
      }
    } else if (key == "degeneracy_window") {
      need(value.is_number_integer() && value.get<std::int64_t>() > 0, "a positive integer");
      c.degeneracy_window = value.get<std::size_t>();
    } else if (key == "covariance_entries") {
      need(value.is_string(), "a string");
      try {
        c.covariance_entries = parse_covariance_entries(value.get<std::string>());
      } catch (const Error& e) {
        throw ParseError(where + ": " + e.what());
      }
    } else if (key == "vicinity_radius") {
      need(value.is_number() && value.get<double>() > 0.0, "a positive number");
      c.vicinity_radius = value.get<double>();
    } else if (key == "replanning") {
      need(value.is_boolean(), "a boolean");
      c.replanning = value.get<bool>();
    } else if (key == "subpath_optimization") {
      need(value.is_boolean(), "a boolean");
      c.subpath_optimization = value.get<bool>();
    } else if (key == "strategy") {
      need(value.is_string(), "a string");
      c.strategy = parse_strategy(value.get<std::string>());
    } else if (key == "prune") {
      need(value.is_boolean(), "a boolean");
      c.prune = value.get<bool>();
    } else if (key == "fim_half") {
      need(value.is_boolean(), "a boolean");
      c.fim_half = value.get<bool>();
    } else if (key == "max_iters") {
      need(value.is_number_integer() && value.get<std::int64_t>() > 0, "a positive integer");
      c.optimizer.max_iters = value.get<int>();
    } else if (key == "tol") {
      need(value.is_number() && value.get<double>() > 0.0, "a positive number");
      c.optimizer.tol = value.get<double>();
    } else {
      throw ParseError("mission config: unknown key '" + key + "'");
    }
  }
  return c;
}

inline nlohmann::json to_json(const MissionConfig& c) {
  return {{"seeds", c.seeds},
          {"degeneracy_window", c.degeneracy_window},
          {"covariance_entries", std::string(to_string(c.covariance_entries))},
          {"vicinity_radius", c.vicinity_radius},
          {"replanning", c.replanning},
          {"subpath_optimization", c.subpath_optimization},
          {"strategy", to_string(c.strategy)},
          {"prune", c.prune},
          {"fim_half", c.fim_half},
          {"max_iters", c.optimizer.max_iters},
          {"tol", c.optimizer.tol}};
}

/// Explicit path wins; otherwise the file named by SLAMPLAN_CONFIG; otherwise defaults.
inline MissionConfig load_mission_config(const std::optional<std::string>& path) {
  std::optional<std::string> p = path;
  if (!p) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) p = std::string(env);
  }
  if (!p) return {};
  return mission_config_from_json(read_json_file(*p));
}

// ---------------------------------------------------------------------------
// Waypoint plans
// ---------------------------------------------------------------------------

enum class WaypointRole { kCover, kLoopTarget, kLoopReturn };

/*
 * One entry of the executable plan. Cover waypoints are skipped when already
 * visited unless they anchor a pending loop action; loop targets and returns
 * are always driven to.
 */
struct Waypoint {
  VertexIndex vertex = 0;
  WaypointRole role = WaypointRole::kCover;
  bool anchor = false;
  std::size_t action = 0;  // index into MissionPlan::actions for loop roles
};

struct MissionPlan {
  std::vector<Waypoint> waypoints;
  std::vector<LoopAction> actions;
};

/// Coverage order = first occurrences in the coverage walk after `from`; each action follows its anchor.
inline MissionPlan mission_plan_from(const Plan& plan, VertexIndex from) {
  MissionPlan mp;
  mp.actions = plan.actions;
  std::vector<char> seen;
  const auto& seq = plan.tsp_walk.sequence;
  VertexIndex top = from;
  for (auto v : seq) top = std::max(top, v);
  for (const auto& a : plan.actions) top = std::max({top, a.anchor, a.target});
  seen.assign(top + 1, 0);
  seen[from] = 1;
  std::size_t next_action = 0;
  auto emit_actions = [&](VertexIndex v) {
    while (next_action < mp.actions.size() && mp.actions[next_action].anchor == v) {
      mp.waypoints.push_back({mp.actions[next_action].target, WaypointRole::kLoopTarget, false, next_action});
      mp.waypoints.push_back({v, WaypointRole::kLoopReturn, false, next_action});
      ++next_action;
    }
  };
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const VertexIndex v = seq[k];
    if (seen[v]) continue;
    seen[v] = 1;
    const bool anchor = next_action < mp.actions.size() && mp.actions[next_action].anchor == v;
    mp.waypoints.push_back({v, WaypointRole::kCover, anchor, 0});
    emit_actions(v);
  }
  if (next_action != mp.actions.size()) throw GraphError("mission plan: loop action anchors out of walk order");
  return mp;
}

/*
 * The walk a waypoint list produces from `current`, applying the skip rule
 * against a copy of `visited` that grows along the way.
 */
inline std::vector<VertexIndex> expand_waypoints(VertexIndex current, const std::vector<Waypoint>& waypoints,
                                                 std::vector<char> visited, const MetricClosure& mc) {
  std::vector<VertexIndex> seq{current};
  for (const auto& w : waypoints) {
    if (w.role == WaypointRole::kCover && !w.anchor && visited[w.vertex]) continue;
    const auto path = mc.path(seq.back(), w.vertex);
    for (std::size_t k = 1; k < path.size(); ++k) {
      seq.push_back(path[k]);
      visited[path[k]] = 1;
    }
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Mission execution
// ---------------------------------------------------------------------------

struct MissionEvent {
  std::size_t step = 0;  // pose index when the event was recorded
  std::string type;      // visit, skip, loop_close, degeneracy_update, connectivity_update,
                         // replan_accepted, replan_rejected, subpath_optimized
  VertexIndex vertex = 0;
  nlohmann::json detail = nlohmann::json::object();
};

struct MissionLog {
  std::vector<MissionEvent> events;
  std::vector<VertexIndex> history;  // every vertex the robot stood on, in order
  SimPoseGraph pose_graph;           // optimized estimates after the mission
  PriorGraph final_prior;
  double traveled = 0.0;
  Plan initial_plan;
};

struct MissionResult {
  MissionLog log;
  MissionMetrics metrics;
};

/// Live state of a mission between steps.
struct MissionState {
  PriorGraph prior;
  MetricClosure mc;
  const WorldModel* world = nullptr;
  MissionConfig config;
  PoseGraphBuilder builder;
  std::vector<char> visited;
  std::vector<char> updated_region;  // regions that have had their own degeneracy estimate
  VertexIndex current = 0;
  MissionPlan plan;
  std::vector<LoopAction> executed_actions;
  std::vector<VertexIndex> history;
  std::vector<MissionEvent> events;
  double traveled = 0.0;
  bool assumption_ok = true;

  MissionState(const PriorGraph& p, const WorldModel& w, const MissionConfig& c, std::uint64_t seed)
      : prior(p), mc(p), world(&w), config(c), builder(w, seed) {}

  void log(std::string type, VertexIndex v, nlohmann::json detail = nlohmann::json::object()) {
    events.push_back({builder.graph().pose_count() == 0 ? 0 : builder.graph().pose_count() - 1, std::move(type), v,
                      std::move(detail)});
  }
};

/*
 * Sets the visited vertex's degeneracy to the mean covariance of the N
 * odometry edges whose estimated midpoints lie nearest to it; regions not
 * yet covered take the mean over every odometry edge.
 */
inline void degeneracy_update(MissionState& s, VertexIndex v) {
  const SimPoseGraph& pg = s.builder.graph();
  struct Near {
    double d2;
    std::size_t edge;
  };
  std::vector<Near> near;
  Matrix3 all = Matrix3::Zero();
  for (std::size_t k = 0; k < pg.edges.size(); ++k) {
    const auto& m = pg.edges[k];
    if (m.kind != EdgeKind::kOdometry) continue;
    const Eigen::Vector2d mid = 0.5 * (pg.estimates[m.i].head<2>() + pg.estimates[m.j].head<2>());
    near.push_back({(mid - s.prior.position(v)).squaredNorm(), k});
    all += m.covariance;
  }
  if (near.empty()) return;
  all /= static_cast<double>(near.size());
  const std::size_t take = std::min(s.config.degeneracy_window, near.size());
  std::stable_sort(near.begin(), near.end(), [](const Near& a, const Near& b) { return a.d2 < b.d2; });
  Matrix3 local = Matrix3::Zero();
  for (std::size_t k = 0; k < take; ++k) local += pg.edges[near[k].edge].covariance;
  local /= static_cast<double>(take);

  std::vector<Matrix3> regions(s.prior.vertex_count());
  for (VertexIndex u = 0; u < regions.size(); ++u) {
    regions[u] = s.updated_region[u] ? s.prior.region_covariance(u) : all;
  }
  regions[v] = local;
  s.updated_region[v] = 1;
  s.prior = s.prior.with_region_covariances(std::move(regions));
  s.log("degeneracy_update", v, {{"edges", take}});
}

/// Reveals every hidden world edge whose endpoints have both been visited; returns the number added.
inline std::size_t connectivity_update(MissionState& s) {
  std::size_t added = 0;
  for (const auto& h : s.world->hidden_edges) {
    if (!s.visited[h.u] || !s.visited[h.v] || s.prior.adjacent(h.u, h.v)) continue;
    EdgeInput e;
    e.u = h.u;
    e.v = h.v;
    e.length = h.length.value_or(s.prior.euclidean(h.u, h.v));
    e.covariance = 0.5 * (s.prior.region_covariance(h.u) + s.prior.region_covariance(h.v));
    s.prior = s.prior.with_added_edge(e);
    s.log("connectivity_update", h.u, {{"u", id_json(s.prior, h.u)}, {"v", id_json(s.prior, h.v)}, {"length", *e.length}});
    ++added;
  }
  if (added) s.mc = MetricClosure(s.prior);
  return added;
}

/*
 * log J_rem of a waypoint list: D-opt of the abstracted Laplacian over the
 * traveled history followed by the walk the waypoints produce, with one
 * loop-edge factor per executed and pending loop action, divided by the
 * traveled plus remaining distance.
 */
inline double remaining_log_objective(const MissionState& s, const MissionPlan& mp) {
  std::vector<VertexIndex> seq = s.history;
  const auto rest = expand_waypoints(s.current, mp.waypoints, s.visited, s.mc);
  seq.insert(seq.end(), rest.begin() + 1, rest.end());
  AbstractedPoseGraph apg = abstract_pose_graph(seq, s.prior);
  if (apg.n() == 0) return 0.0;
  auto add = [&](const LoopAction& a) {
    const PoseIndex i = apg.vertex_to_pose.at(a.anchor), j = apg.vertex_to_pose.at(a.target);
    apg.factor.rank1_update(candidate_gamma(s.prior, a.anchor, a.target), reduced_incidence(i, j, 0));
  };
  for (const auto& a : s.executed_actions) add(a);
  for (const auto& w : mp.waypoints) {
    if (w.role == WaypointRole::kLoopTarget) add(mp.actions[w.action]);
  }
  const double distance = s.traveled + walk_length(s.prior, rest);
  return log_objective(apg.factor, distance);
}

/*
 * Full planner from the current vertex over the unvisited vertices of the
 * live prior: open TSP, then loop selection with anchors restricted to
 * future poses and the executed loop edges already in the base factor.
 */
inline MissionPlan replan_candidate(const MissionState& s, bool* assumption_ok = nullptr) {
  std::vector<VertexIndex> subset{s.current};
  for (VertexIndex v = 0; v < s.prior.vertex_count(); ++v) {
    if (!s.visited[v]) subset.push_back(v);
  }
  if (subset.size() == 1) return {};
  const TourCosts tc = build_tour_costs(s.mc, subset, s.current);
  const Walk walk = expand_to_walk(solve_open_tsp(tc), s.mc, s.prior);
  if (s.config.strategy == Strategy::kTspOnly) {
    Plan p;
    p.tsp_walk = walk;
    return mission_plan_from(p, s.current);
  }
  std::vector<VertexIndex> seq = s.history;
  seq.insert(seq.end(), walk.sequence.begin() + 1, walk.sequence.end());
  AbstractedPoseGraph apg = abstract_pose_graph(seq, s.prior);
  for (const auto& a : s.executed_actions) {
    apg.factor.rank1_update(candidate_gamma(s.prior, a.anchor, a.target),
                            reduced_incidence(apg.vertex_to_pose[a.anchor], apg.vertex_to_pose[a.target], 0));
  }
  std::size_t past = 0;
  for (VertexIndex v = 0; v < s.prior.vertex_count(); ++v) past += s.visited[v] ? 1 : 0;
  const auto cands = enumerate_candidates(apg, s.mc, s.prior, past);
  const GreedyResult gr = greedy_select(apg, cands, s.traveled + walk.total_length, {s.config.prune});
  const Plan p = insert_loop_edges(walk, gr.selected, apg, s.mc, s.prior);
  if (assumption_ok) *assumption_ok = gr.assumption_ok;
  return mission_plan_from(p, s.current);
}

/// Runs the planner again and adopts the result only if it strictly improves J_rem.
inline bool replan(MissionState& s) {
  bool ok = true;
  MissionPlan fresh = replan_candidate(s, &ok);
  const double old_lj = remaining_log_objective(s, s.plan);
  const double new_lj = remaining_log_objective(s, fresh);
  const bool adopt = new_lj > old_lj + std::log1p(1e-9);
  s.log(adopt ? "replan_accepted" : "replan_rejected", s.current,
        {{"j_rem_old", std::exp(old_lj)}, {"j_rem_new", std::exp(new_lj)}});
  if (adopt) {
    s.plan = std::move(fresh);
    s.assumption_ok = s.assumption_ok && ok;
  }
  return adopt;
}

/*
 * Re-solves the cover waypoints between the current vertex and the next
 * loop-closing vertex as an open TSP with that vertex as a fixed end (free
 * end when no loop action remains). Replaces the segment only if strictly
 * shorter.
 */
inline bool optimize_subpath(MissionState& s) {
  std::size_t end = 0;
  while (end < s.plan.waypoints.size() && s.plan.waypoints[end].role == WaypointRole::kCover &&
         !s.plan.waypoints[end].anchor) {
    ++end;
  }
  const bool fixed_end = end < s.plan.waypoints.size();
  if (fixed_end && s.plan.waypoints[end].role != WaypointRole::kCover) return false;  // already at the anchor
  std::vector<VertexIndex> seg;
  for (std::size_t k = 0; k < end; ++k) {
    const VertexIndex v = s.plan.waypoints[k].vertex;
    if (!s.visited[v] && std::find(seg.begin(), seg.end(), v) == seg.end()) seg.push_back(v);
  }
  const std::optional<VertexIndex> end_vertex =
      fixed_end ? std::optional<VertexIndex>(s.plan.waypoints[end].vertex) : std::nullopt;
  if (seg.size() + (end_vertex ? 1 : 0) < 2) return false;

  std::vector<Waypoint> old_seg(s.plan.waypoints.begin(), s.plan.waypoints.begin() + static_cast<std::ptrdiff_t>(end));
  if (end_vertex) old_seg.push_back(s.plan.waypoints[end]);
  const double old_len = walk_length(s.prior, expand_waypoints(s.current, old_seg, s.visited, s.mc));

  std::vector<VertexIndex> subset = seg;
  subset.push_back(s.current);
  if (end_vertex) subset.push_back(*end_vertex);
  const TourCosts tc = build_tour_costs(s.mc, subset, s.current);
  const auto order = solve_open_tsp(tc, end_vertex);
  std::vector<Waypoint> new_seg;
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (end_vertex && order[k] == *end_vertex) continue;
    new_seg.push_back({order[k], WaypointRole::kCover, false, 0});
  }
  std::vector<Waypoint> trial = new_seg;
  if (end_vertex) trial.push_back(s.plan.waypoints[end]);
  const double new_len = walk_length(s.prior, expand_waypoints(s.current, trial, s.visited, s.mc));
  if (!(new_len < old_len - 1e-9)) return false;
  s.plan.waypoints.erase(s.plan.waypoints.begin(), s.plan.waypoints.begin() + static_cast<std::ptrdiff_t>(end));
  s.plan.waypoints.insert(s.plan.waypoints.begin(), new_seg.begin(), new_seg.end());
  s.log("subpath_optimized", s.current, {{"old_length", old_len}, {"new_length", new_len}});
  return true;
}

namespace detail {

inline void arrive(MissionState& s, VertexIndex v, bool loop_action) {
  if (!s.history.empty()) s.traveled += s.prior.edge(*s.prior.find_edge(s.history.back(), v)).length;
  s.builder.add_pose(v, loop_action);
  s.history.push_back(v);
  s.current = v;
  if (s.visited[v]) return;
  s.visited[v] = 1;
  s.log("visit", v);
  degeneracy_update(s, v);
  connectivity_update(s);
}

}  // namespace detail

/// Creates the mission state with the robot standing on the start vertex.
inline MissionState start_mission(const PriorGraph& prior, const WorldModel& world, const MissionConfig& config,
                                  std::uint64_t seed) {
  check_world_consistency(prior, world);
  MissionState s(prior, world, config, seed);
  s.visited.assign(prior.vertex_count(), 0);
  s.updated_region.assign(prior.vertex_count(), 0);
  detail::arrive(s, prior.start(), false);
  return s;
}

/// Follows `s.plan` to completion, then optimizes the pose graph and evaluates it.
inline MissionResult execute_mission(MissionState& s, Plan initial_plan = {}) {
  std::size_t closure_edges = s.prior.edge_count();
  while (!s.plan.waypoints.empty()) {
    const Waypoint w = s.plan.waypoints.front();
    s.plan.waypoints.erase(s.plan.waypoints.begin());
    if (w.role == WaypointRole::kCover && !w.anchor && s.visited[w.vertex]) {
      s.log("skip", w.vertex);
      continue;
    }
    const auto path = s.mc.path(s.current, w.vertex);
    for (std::size_t k = 1; k < path.size(); ++k) {
      detail::arrive(s, path[k], w.role == WaypointRole::kLoopTarget && k + 1 == path.size());
    }
    if (w.role == WaypointRole::kLoopTarget) {
      const LoopAction action = s.plan.actions[w.action];
      s.executed_actions.push_back(action);
      s.log("loop_close", w.vertex,
            {{"anchor", id_json(s.prior, action.anchor)}, {"target", id_json(s.prior, action.target)}});
      if (s.config.replanning) replan(s);
    }
    if (s.config.subpath_optimization && s.prior.edge_count() != closure_edges) {
      closure_edges = s.prior.edge_count();
      optimize_subpath(s);
    }
  }
  for (VertexIndex v = 0; v < s.prior.vertex_count(); ++v) {
    if (!s.visited[v]) throw GraphError("mission ended without covering vertex '" + s.prior.id(v) + "'");
  }

  MissionResult r;
  MissionLog& log = r.log;
  log.initial_plan = std::move(initial_plan);
  log.pose_graph = s.builder.take();
  log.pose_graph.estimates = optimize_pose_graph(log.pose_graph, s.config.optimizer).estimates;
  log.events = std::move(s.events);
  log.history = std::move(s.history);
  log.final_prior = s.prior;
  log.traveled = s.traveled;
  r.metrics = compute_metrics(log.pose_graph, log.traveled, s.assumption_ok, s.config.fim_half);
  return r;
}

/// Plans from the start vertex, executes the hierarchical mission loop and evaluates the result.
inline MissionResult run_mission(const PriorGraph& prior, const WorldModel& world, const MissionConfig& config,
                                 std::uint64_t seed) {
  MissionState s = start_mission(prior, world, config, seed);
  Plan initial = plan_exploration(s.prior, s.mc, {config.strategy, config.prune});
  s.assumption_ok = initial.assumption_ok;
  s.plan = mission_plan_from(initial, s.current);
  return execute_mission(s, std::move(initial));
}

/// One JSON object per line, in event order.
inline std::string events_jsonl(const MissionLog& log, const PriorGraph& g) {
  std::string out;
  for (const auto& e : log.events) {
    nlohmann::json j = {{"step", e.step}, {"event", e.type}, {"vertex", id_json(g, e.vertex)}};
    for (const auto& [k, v] : e.detail.items()) j[k] = v;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace slamplan
