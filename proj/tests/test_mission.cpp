#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "slamplan/mission.hpp"

using namespace slamplan;

namespace {

/// a - b - c - d along the x axis with the given edge sigma.
PriorGraph path4(double s) {
  std::vector<Vertex> vs{{"a", {0, 0}}, {"b", {1, 0}}, {"c", {2, 0}}, {"d", {3, 0}}};
  std::vector<EdgeInput> es;
  for (VertexIndex k = 0; k < 3; ++k) {
    EdgeInput e;
    e.u = k;
    e.v = k + 1;
    e.covariance = diagonal_covariance({s, s, s / 100.0});
    es.push_back(e);
  }
  return PriorGraph(std::move(vs), es, 0);
}

std::size_t count_events(const MissionLog& log, const std::string& type) {
  std::size_t n = 0;
  for (const auto& e : log.events) n += e.type == type ? 1 : 0;
  return n;
}

/// Random world plus a connected prior that hides some of its edges.
struct HiddenInstance {
  PriorGraph prior;
  WorldModel world;
};

HiddenInstance random_hidden_instance(int n, std::mt19937_64& rng, double hide) {
  const PriorGraph full = oracle::random_prior_graph(n, 0.35, rng, 10.0);
  std::bernoulli_distribution drop(hide);
  std::vector<EdgeInput> kept, hidden;
  for (const auto& e : full.edges()) {
    EdgeInput in;
    in.u = e.u;
    in.v = e.v;
    in.length = e.length;
    kept.push_back(in);
  }
  std::shuffle(kept.begin(), kept.end(), rng);
  for (std::size_t k = 0; k < kept.size();) {
    std::vector<EdgeInput> trial = kept;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
    oracle::EdgeList pairs;
    for (const auto& e : trial) pairs.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v));
    if (drop(rng) && oracle::connected(n, pairs)) {
      hidden.push_back(kept[k]);
      kept = std::move(trial);
    } else {
      ++k;
    }
  }
  std::vector<Vertex> vs;
  for (VertexIndex v = 0; v < full.vertex_count(); ++v) vs.push_back({full.id(v), full.position(v)});
  HiddenInstance out{PriorGraph(vs, kept, full.start()), {}};
  out.world = world_from_prior(full);
  out.world.hidden_edges = hidden;
  return out;
}

}  // namespace

TEST(MissionConfig, DefaultsAndRoundTrip) {
  const MissionConfig c = mission_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.degeneracy_window, 5u);
  EXPECT_TRUE(c.replanning);
  EXPECT_EQ(c.strategy, Strategy::kSlamAware);
  const nlohmann::json j = {{"seeds", {3, 4}}, {"degeneracy_window", 2}, {"strategy", "tsp_only"},
                            {"replanning", false}, {"covariance_entries", "stddev"}, {"tol", 1e-6}};
  const MissionConfig d = mission_config_from_json(j);
  EXPECT_EQ(d.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(d.degeneracy_window, 2u);
  EXPECT_EQ(d.strategy, Strategy::kTspOnly);
  EXPECT_FALSE(d.replanning);
  EXPECT_EQ(d.covariance_entries, CovarianceEntries::kStddev);
  EXPECT_EQ(to_json(mission_config_from_json(to_json(d))), to_json(d));
}

TEST(MissionConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(mission_config_from_json({{"degeneracy_windw", 3}}), ParseError);
  EXPECT_THROW(mission_config_from_json({{"degeneracy_window", 0}}), ParseError);
  EXPECT_THROW(mission_config_from_json({{"seeds", nlohmann::json::array()}}), ParseError);
  EXPECT_THROW(mission_config_from_json({{"replanning", "yes"}}), ParseError);
  EXPECT_THROW(mission_config_from_json({{"strategy", "greedy"}}), Error);
  EXPECT_THROW(mission_config_from_json(nlohmann::json::array()), ParseError);
}

TEST(MissionConfig, EnvironmentVariableSuppliesDefaultPath) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto env_path = dir / "slamplan_env_config.json";
  const auto arg_path = dir / "slamplan_arg_config.json";
  std::ofstream(env_path) << R"({"degeneracy_window": 7})";
  std::ofstream(arg_path) << R"({"degeneracy_window": 9})";
  ::setenv(kConfigEnvVar, env_path.c_str(), 1);
  EXPECT_EQ(load_mission_config(std::nullopt).degeneracy_window, 7u);
  EXPECT_EQ(load_mission_config(arg_path.string()).degeneracy_window, 9u);
  ::unsetenv(kConfigEnvVar);
  EXPECT_EQ(load_mission_config(std::nullopt).degeneracy_window, 5u);
  std::filesystem::remove(env_path);
  std::filesystem::remove(arg_path);
}

TEST(MissionPlan, AnchorsCarryLoopWaypoints) {
  const auto g = fixtures::path3();
  const MetricClosure mc(g);
  const Walk w = make_walk(g, {0, 1, 2});
  const auto apg = abstract_pose_graph(w, g);
  const Plan p = insert_loop_edges(w, enumerate_candidates(apg, mc, g), apg, mc, g);
  ASSERT_EQ(p.actions.size(), 1u);
  const MissionPlan mp = mission_plan_from(p, 0);
  ASSERT_EQ(mp.waypoints.size(), 4u);
  EXPECT_EQ(mp.waypoints[0].vertex, 1u);
  EXPECT_EQ(mp.waypoints[1].vertex, 2u);
  EXPECT_TRUE(mp.waypoints[1].anchor);
  EXPECT_EQ(mp.waypoints[2].role, WaypointRole::kLoopTarget);
  EXPECT_EQ(mp.waypoints[2].vertex, 0u);
  EXPECT_EQ(mp.waypoints[3].role, WaypointRole::kLoopReturn);
  EXPECT_EQ(mp.waypoints[3].vertex, 2u);
  const auto seq = expand_waypoints(0, mp.waypoints, {1, 0, 0}, mc);
  EXPECT_EQ(seq, p.walk.sequence);
}

TEST(Mission, PathWithoutActionsVisitsInOrder) {
  const auto g = fixtures::path3();
  MissionConfig c;
  c.strategy = Strategy::kTspOnly;
  const auto r = run_mission(g, world_from_prior(g), c, 1);
  EXPECT_EQ(r.log.history, (std::vector<VertexIndex>{0, 1, 2}));
  std::vector<std::string> types;
  for (const auto& e : r.log.events) types.push_back(e.type);
  EXPECT_EQ(types, (std::vector<std::string>{"visit", "visit", "degeneracy_update", "visit", "degeneracy_update"}));
  EXPECT_EQ(r.metrics.pose_count, 3u);
  EXPECT_DOUBLE_EQ(r.metrics.total_distance, 2.0);
}

TEST(Mission, VisitedCoverWaypointIsSkipped) {
  const auto g = fixtures::path3();
  const auto world = world_from_prior(g);
  MissionState s = start_mission(g, world, {}, 1);
  s.plan.waypoints = {{1, WaypointRole::kCover, false, 0}, {0, WaypointRole::kCover, false, 0},
                      {2, WaypointRole::kCover, false, 0}};
  const auto r = execute_mission(s);
  EXPECT_EQ(count_events(r.log, "skip"), 1u);
  EXPECT_EQ(r.log.history, (std::vector<VertexIndex>{0, 1, 2}));
}

TEST(Mission, LoopCloseIsFollowedByReplan) {
  const auto g = path4(1.0);
  const auto r = run_mission(g, world_from_prior(g), {}, 1);
  ASSERT_GE(count_events(r.log, "loop_close"), 1u);
  for (std::size_t k = 0; k < r.log.events.size(); ++k) {
    if (r.log.events[k].type != "loop_close") continue;
    ASSERT_LT(k + 1, r.log.events.size());
    const auto& next = r.log.events[k + 1].type;
    EXPECT_TRUE(next == "replan_accepted" || next == "replan_rejected") << next;
  }
  EXPECT_EQ(r.log.pose_graph.count(EdgeKind::kLoopAction), count_events(r.log, "loop_close"));
}

TEST(Mission, ReplanningDisabledFollowsInitialPlan) {
  const auto g = path4(1.0);
  MissionConfig c;
  c.replanning = false;
  const auto r = run_mission(g, world_from_prior(g), c, 1);
  EXPECT_EQ(count_events(r.log, "replan_accepted") + count_events(r.log, "replan_rejected"), 0u);
  EXPECT_EQ(r.log.history, r.log.initial_plan.walk.sequence);
  EXPECT_EQ(count_events(r.log, "loop_close"), r.log.initial_plan.actions.size());
}

TEST(Mission, ReplanAtStartDoesNotChangeThePlan) {
  const auto g = path4(1.0);
  const auto world = world_from_prior(g);
  MissionState s = start_mission(g, world, {}, 1);
  const Plan initial = plan_exploration(s.prior, s.mc);
  s.plan = mission_plan_from(initial, s.current);
  const auto before = s.plan.waypoints.size();
  EXPECT_FALSE(replan(s));
  EXPECT_EQ(s.plan.waypoints.size(), before);
  EXPECT_EQ(s.events.back().type, "replan_rejected");
}

TEST(Mission, RemainingObjectiveOfInitialPlanMatchesPlanner) {
  const auto g = path4(1.0);
  const auto world = world_from_prior(g);
  MissionState s = start_mission(g, world, {}, 1);
  const Plan initial = plan_exploration(s.prior, s.mc);
  s.plan = mission_plan_from(initial, s.current);
  EXPECT_NEAR(std::exp(remaining_log_objective(s, s.plan)), initial.objective, 1e-9 * initial.objective);
}

TEST(Degeneracy, FewerEdgesThanWindowAveragesAll) {
  const auto g = path4(1.0);
  WorldModel world = world_from_prior(g);
  for (VertexIndex v = 0; v < 4; ++v) world.region_degeneracy[v] = diagonal_covariance({1.0 + v, 2.0 + v, 0.1 + v});
  MissionState s = start_mission(g, world, {}, 1);
  for (VertexIndex v : {1u, 2u, 3u}) detail::arrive(s, v, false);
  Matrix3 mean = Matrix3::Zero();
  for (VertexIndex k = 0; k < 3; ++k) mean += world.odometry_covariance(k, k + 1);
  mean /= 3.0;
  EXPECT_TRUE(s.prior.region_covariance(3).isApprox(mean, 1e-12));
  EXPECT_EQ(s.events.back().detail.at("edges"), 3);
}

TEST(Degeneracy, IdenticalCovariancesGiveThatCovariance) {
  const auto g = path4(1.0);
  WorldModel world = world_from_prior(g);
  const Matrix3 d = diagonal_covariance({0.4, 0.5, 0.02});
  world.region_degeneracy.assign(4, d);
  MissionConfig c;
  c.degeneracy_window = 2;
  MissionState s = start_mission(g, world, c, 1);
  for (VertexIndex v : {1u, 2u, 3u}) detail::arrive(s, v, false);
  for (VertexIndex v = 0; v < 4; ++v) EXPECT_TRUE(s.prior.region_covariance(v).isApprox(d, 1e-12)) << v;
}

TEST(Degeneracy, NoEdgesLeavesPriorUntouched) {
  const auto g = path4(1.0);
  const auto world = world_from_prior(g);
  const MissionState s = start_mission(g, world, {}, 1);
  EXPECT_EQ(s.prior.revision(), g.revision());
  EXPECT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0].type, "visit");
}

TEST(Connectivity, HiddenEdgeRevealedOnceBothEndsVisited) {
  const auto g = fixtures::path3();
  WorldModel world = world_from_prior(g);
  EdgeInput h;
  h.u = 0;
  h.v = 2;
  h.length = 1.5;
  world.true_graph = g.with_added_edge(h);
  world.hidden_edges = {h};
  MissionState s = start_mission(g, world, {}, 1);
  detail::arrive(s, 1, false);
  EXPECT_FALSE(s.prior.adjacent(0, 2));
  detail::arrive(s, 2, false);
  ASSERT_TRUE(s.prior.adjacent(0, 2));
  EXPECT_DOUBLE_EQ(s.prior.edge(*s.prior.find_edge(0, 2)).length, 1.5);
  EXPECT_DOUBLE_EQ(s.mc.dist(2, 0), 1.5);
  EXPECT_EQ(s.events.back().type, "connectivity_update");
  EXPECT_EQ(connectivity_update(s), 0u);
}

TEST(Connectivity, WorldMustContainPrior) {
  const auto g = fixtures::triangle();
  const auto world = world_from_prior(fixtures::path3());
  EXPECT_THROW(start_mission(g, world, {}, 1), GraphError);
}

TEST(Subpath, RevealedShortcutReordersRemainingCover) {
  // Spur e hangs off a, so the plan reaches it last via the chain; the hidden
  // edge c-a is revealed when c is visited and shortens the way back.
  const auto g = fixtures::make_graph({"a", "b", "c", "d", "e"}, {{0, 0}, {1, 0}, {1, 1}, {2, 0}, {-1, 0}},
                                      {{0, 1, 1.0}, {1, 2, 1.0}, {1, 3, 1.0}, {0, 4, 1.0}});
  WorldModel world = world_from_prior(g);
  EdgeInput h;
  h.u = 2;
  h.v = 0;
  h.length = 0.5;
  world.true_graph = g.with_added_edge(h);
  world.hidden_edges = {h};
  MissionConfig c;
  c.strategy = Strategy::kTspOnly;
  MissionState s = start_mission(g, world, c, 1);
  s.plan.waypoints = {{1, WaypointRole::kCover, false, 0},
                      {2, WaypointRole::kCover, false, 0},
                      {3, WaypointRole::kCover, false, 0},
                      {4, WaypointRole::kCover, false, 0}};
  const auto r = execute_mission(s);
  ASSERT_EQ(count_events(r.log, "subpath_optimized"), 1u);
  for (const auto& e : r.log.events) {
    if (e.type == "subpath_optimized") EXPECT_LT(e.detail.at("new_length"), e.detail.at("old_length"));
  }
  // b, c, then e through the shortcut before d: 1 + 1 + 0.5 + 1 + 1 + 1 + 1 = 6.5 vs 7 for c, d, e.
  EXPECT_DOUBLE_EQ(r.log.traveled, 6.5);
}

TEST(MissionProperty, RandomHiddenWorldsStayConsistent) {
  std::mt19937_64 rng(41);
  std::size_t reveals = 0, accepted = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = random_hidden_instance(6 + trial % 4, rng, 0.4);
    MissionConfig c;
    c.strategy = trial % 2 ? Strategy::kTspOnly : Strategy::kSlamAware;
    const auto r = run_mission(inst.prior, inst.world, c, static_cast<std::uint64_t>(trial));
    std::vector<char> seen(inst.prior.vertex_count(), 0);
    for (auto v : r.log.history) seen[v] = 1;
    for (auto f : seen) EXPECT_TRUE(f);
    for (std::size_t k = 1; k < r.log.history.size(); ++k) {
      EXPECT_TRUE(inst.world.true_graph.adjacent(r.log.history[k - 1], r.log.history[k]));
    }
    EXPECT_EQ(r.log.pose_graph.pose_count(), r.log.history.size());
    EXPECT_NEAR(r.metrics.total_distance, walk_length(r.log.final_prior, r.log.history), 1e-9);
    for (const auto& e : r.log.events) {
      if (e.type == "replan_accepted") {
        EXPECT_GT(e.detail.at("j_rem_new").get<double>(), e.detail.at("j_rem_old").get<double>());
        ++accepted;
      }
      if (e.type == "subpath_optimized") {
        EXPECT_LT(e.detail.at("new_length").get<double>(), e.detail.at("old_length").get<double>());
      }
      if (e.type == "connectivity_update") ++reveals;
    }
    EXPECT_EQ(r.log.final_prior.edge_count(), inst.prior.edge_count() + count_events(r.log, "connectivity_update"));
  }
  EXPECT_GT(reveals, 0u);
  EXPECT_GT(accepted, 0u);
}

TEST(Mission, DeterministicPerSeed) {
  const auto g = path4(1.0);
  const auto world = world_from_prior(g);
  const auto a = run_mission(g, world, {}, 9);
  const auto b = run_mission(g, world, {}, 9);
  EXPECT_EQ(events_jsonl(a.log, g), events_jsonl(b.log, g));
  EXPECT_EQ(metrics_csv_row(9, "slam_aware", a.metrics), metrics_csv_row(9, "slam_aware", b.metrics));
  const auto c = run_mission(g, world, {}, 10);
  EXPECT_NE(a.metrics.ape_rmse, c.metrics.ape_rmse);
}

TEST(Mission, EventsJsonlIsOneObjectPerLine) {
  const auto g = path4(1.0);
  const auto r = run_mission(g, world_from_prior(g), {}, 1);
  std::istringstream in(events_jsonl(r.log, g));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step"));
    EXPECT_TRUE(j.contains("event"));
    EXPECT_TRUE(j.contains("vertex"));
    EXPECT_EQ(j.at("event"), r.log.events[n].type);
    ++n;
  }
  EXPECT_EQ(n, r.log.events.size());
}
