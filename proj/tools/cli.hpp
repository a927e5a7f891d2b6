#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slamplan/bench.hpp"

namespace slamplan::cli {

/// Writes `text` to `path`, or to `out` when the path is empty or "-".
inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write file '" + path + "'");
  f << text;
  if (!f) throw ParseError("failed writing file '" + path + "'");
}

struct Inputs {
  std::string config;
  std::string graph, world, spec;
  std::string out, events, trajectory, summary, plan_out;
  std::string strategy;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t seed_count = 0;
  std::uint64_t seed_base = 1;
  unsigned threads = 0;
  int repeats = 1;
  bool no_prune = false;
};

inline MissionConfig resolve_config(const Inputs& in) {
  MissionConfig c = load_mission_config(in.config.empty() ? std::nullopt : std::optional<std::string>(in.config));
  if (!in.strategy.empty()) c.strategy = parse_strategy(in.strategy);
  if (in.no_prune) c.prune = false;
  return c;
}

inline int run_plan(const Inputs& in, std::ostream& out) {
  const MissionConfig c = resolve_config(in);
  const PriorGraph g = load_prior_graph_file(in.graph, c.covariance_entries);
  const Plan p = plan_exploration(g, {c.strategy, c.prune});
  emit(in.out, to_json(p, g).dump(2) + "\n", out);
  return 0;
}

inline int run_simulate(const Inputs& in, std::ostream& out) {
  const MissionConfig c = resolve_config(in);
  const PriorGraph g = load_prior_graph_file(in.graph, c.covariance_entries);
  const WorldModel w = load_world_file(in.world, g, c.covariance_entries);
  const std::uint64_t seed = in.seed_given ? in.seed : c.seeds.front();
  const MissionResult r = run_mission(g, w, c, seed);
  emit(in.out, metrics_csv_header() + "\n" + metrics_csv_row(seed, to_string(c.strategy), r.metrics) + "\n", out);
  if (!in.events.empty()) emit(in.events, events_jsonl(r.log, g), out);
  if (!in.trajectory.empty()) emit(in.trajectory, trajectory_json(r.log.pose_graph, g).dump(2) + "\n", out);
  if (!in.plan_out.empty()) emit(in.plan_out, to_json(r.log.initial_plan, g).dump(2) + "\n", out);
  return 0;
}

inline int run_bench_prune(const Inputs& in, std::ostream& out) {
  const MissionConfig c = resolve_config(in);
  const nlohmann::json doc = read_json_file(in.spec);
  std::string text = prune_report_csv_header() + "\n";
  const std::string label = std::filesystem::path(in.spec).stem().string();
  if (is_grid_spec(doc)) {
    GridGraphSpec spec = grid_spec_from_json(doc);
    std::vector<std::uint64_t> seeds{spec.seed};
    if (in.seed_given) {
      seeds = {in.seed};
    } else if (doc.contains("seeds")) {
      seeds.clear();
      for (const auto& s : doc.at("seeds")) {
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ParseError(in.spec + ": 'seeds' must hold non-negative integers");
        seeds.push_back(s.get<std::uint64_t>());
      }
    }
    for (auto s : seeds) {
      spec.seed = s;
      text += prune_report_csv_row(label, s, bench_prune(gen_grid_graph(spec), in.repeats)) + "\n";
    }
  } else {
    const PriorGraph g = load_prior_graph(doc, c.covariance_entries);
    text += prune_report_csv_row(label, in.seed_given ? in.seed : 0, bench_prune(g, in.repeats)) + "\n";
  }
  emit(in.out, text, out);
  return 0;
}

inline int run_gen_graph(const Inputs& in, std::ostream& out) {
  GridGraphSpec spec = grid_spec_from_json(read_json_file(in.spec));
  if (in.seed_given) spec.seed = in.seed;
  emit(in.out, to_json(gen_grid_graph(spec)).dump(2) + "\n", out);
  return 0;
}

inline int run_compare(const Inputs& in, std::ostream& out) {
  const MissionConfig c = resolve_config(in);
  const PriorGraph g = load_prior_graph_file(in.graph, c.covariance_entries);
  const WorldModel w = load_world_file(in.world, g, c.covariance_entries);
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < in.seed_count; ++k) seeds.push_back(in.seed_base + k);
  const Comparison cmp = compare_strategies(g, w, seeds, c, in.threads);
  if (in.summary.empty()) {
    emit(in.out, comparison_csv(cmp) + "\n" + comparison_summary_csv(cmp), out);
  } else {
    emit(in.out, comparison_csv(cmp), out);
    emit(in.summary, comparison_summary_csv(cmp), out);
  }
  return 0;
}

/// Entry point shared by the executable and the tests.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Exploration planning with active loop closing over prior topo-metric graphs", "slamplan"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Inputs in;
  app.add_option("--config", in.config,
                 std::string("Mission config file (default: $") + kConfigEnvVar + ", then built-in defaults)");

  auto* plan = app.add_subcommand("plan", "Plan an exploration walk with loop actions");
  plan->add_option("graph", in.graph, "Prior graph file")->required();
  plan->add_option("--out", in.out, "Plan document path (default: stdout)");
  plan->add_option("--strategy", in.strategy, "tsp_only or slam_aware");
  plan->add_flag("--no-prune", in.no_prune, "Disable candidate pruning");

  auto* sim = app.add_subcommand("simulate", "Execute a mission in a simulated world and report metrics");
  sim->add_option("graph", in.graph, "Prior graph file")->required();
  sim->add_option("world", in.world, "World file")->required();
  sim->add_option("--seed", in.seed, "Noise seed (default: first config seed)");
  sim->add_option("--strategy", in.strategy, "tsp_only or slam_aware");
  sim->add_option("--out", in.out, "Metrics CSV path (default: stdout)");
  sim->add_option("--events", in.events, "Event log (JSONL) path");
  sim->add_option("--trajectory", in.trajectory, "Trajectory dump (JSON) path");
  sim->add_option("--plan-out", in.plan_out, "Initial plan document path");
  sim->add_flag("--no-prune", in.no_prune, "Disable candidate pruning");

  auto* bench = app.add_subcommand("bench-prune", "Pruning benchmark on a grid spec or a prior graph");
  bench->add_option("input", in.spec, "Grid spec or prior graph file")->required();
  bench->add_option("--seed", in.seed, "Override the spec seed(s)");
  bench->add_option("--repeats", in.repeats, "Timing repetitions (best of)")->check(CLI::PositiveNumber);
  bench->add_option("--out", in.out, "Report CSV path (default: stdout)");

  auto* gen = app.add_subcommand("gen-graph", "Generate a random grid-derived prior graph");
  gen->add_option("spec", in.spec, "Grid spec file")->required();
  gen->add_option("--seed", in.seed, "Override the spec seed");
  gen->add_option("--out", in.out, "Prior graph path (default: stdout)");

  auto* cmp = app.add_subcommand("compare", "Paired tsp_only vs slam_aware missions over a seed sweep");
  cmp->add_option("graph", in.graph, "Prior graph file")->required();
  cmp->add_option("world", in.world, "World file")->required();
  cmp->add_option("--seeds", in.seed_count, "Number of seeds")->required()->check(CLI::Range(2, 100000));
  cmp->add_option("--seed-base", in.seed_base, "First seed (default 1)");
  cmp->add_option("--threads", in.threads, "Worker threads (default: hardware concurrency)");
  cmp->add_option("--out", in.out, "Per-seed metrics CSV path (default: stdout)");
  cmp->add_option("--summary", in.summary, "Summary CSV path (default: appended to the metrics output)");
  cmp->add_flag("--no-prune", in.no_prune, "Disable candidate pruning");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  for (auto* s : {sim, bench, gen}) {
    if (s->parsed() && s->count("--seed")) in.seed_given = true;
  }
  try {
    if (plan->parsed()) return run_plan(in, out);
    if (sim->parsed()) return run_simulate(in, out);
    if (bench->parsed()) return run_bench_prune(in, out);
    if (gen->parsed()) return run_gen_graph(in, out);
    return run_compare(in, out);
  } catch (const std::exception& e) {
    err << "slamplan: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace slamplan::cli
