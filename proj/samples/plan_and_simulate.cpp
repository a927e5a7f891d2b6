// Plans a mission over a prior graph, runs it in a simulated world, and prints both strategies' metrics.
#include <cstdio>
#include <string>

#include "slamplan/mission.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <graph.json> <world.json>\n", argv[0]);
    return 2;
  }
  try {
    const slamplan::PriorGraph g = slamplan::load_prior_graph_file(argv[1]);
    const slamplan::WorldModel w = slamplan::load_world_file(argv[2], g);
    const slamplan::Plan plan = slamplan::plan_exploration(g);
    std::printf("vertices %zu, tsp distance %.3f, planned distance %.3f, loop actions %zu\n", g.vertex_count(),
                plan.d_tsp, plan.walk.total_length, plan.actions.size());
    for (const auto& a : plan.actions) {
      std::printf("  close %s -> %s (omega %.3f)\n", g.id(a.anchor).c_str(), g.id(a.target).c_str(), a.omega);
    }
    std::printf("%s\n", slamplan::metrics_csv_header().c_str());
    for (auto strategy : {slamplan::Strategy::kTspOnly, slamplan::Strategy::kSlamAware}) {
      slamplan::MissionConfig c;
      c.strategy = strategy;
      const auto r = slamplan::run_mission(g, w, c, 1);
      std::printf("%s\n", slamplan::metrics_csv_row(1, slamplan::to_string(strategy), r.metrics).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
