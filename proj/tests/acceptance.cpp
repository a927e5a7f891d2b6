// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "fixtures.hpp"
#include "slamplan/bench.hpp"

using namespace slamplan;

namespace {

// Tolerances and thresholds.
constexpr double kMatrixTreeAbs = 1e-6;
constexpr double kMatrixTreeSeconds = 5.0;
constexpr double kLemmaRel = 1e-9;
constexpr double kDeltaRel = 1e-9;
constexpr std::size_t kMinSubsetChecks = 10000;
constexpr double kSoundnessSlack = 1e-12;
constexpr double kRatio10 = 0.15;
constexpr double kRatio15 = 0.12;
constexpr double kSpeedup15 = 3.0;
constexpr double kPruneBenchSeconds = 120.0;
constexpr double kGreedyQuality = 0.95;
constexpr std::size_t kMaxBruteCandidates = 18;
constexpr double kTspSmallShare = 0.90;
constexpr double kTspLargeFactor = 1.3;
constexpr double kApeNoiseless = 1e-6;
constexpr double kJacobianAbs = 1e-6;
constexpr std::size_t kCompareSeeds = 20;
constexpr std::size_t kMinImprovedSeeds = 15;
constexpr double kMaxOverhead = 0.35;
constexpr double kCompareSeconds = 180.0;

const std::string kData = SLAMPLAN_DATA_DIR;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) { return format_number(v); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::vector<WeightedEdge> weighted(const oracle::EdgeList& el, const std::function<double()>& w) {
  std::vector<WeightedEdge> edges;
  for (auto [u, v] : el) edges.push_back({static_cast<PoseIndex>(u), static_cast<PoseIndex>(v), w()});
  return edges;
}

Outcome matrix_tree() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7;
    const auto el = oracle::random_connected_graph(n, 0.45, rng);
    const double trees = static_cast<double>(oracle::count_spanning_trees(n, el));
    const auto f = reduced_laplacian(static_cast<std::size_t>(n), weighted(el, [] { return 1.0; }), 0);
    worst = std::max(worst, std::abs(std::exp(f.log_det()) - trees));
  }
  const double t = seconds_since(t0);
  return {worst < kMatrixTreeAbs && t < kMatrixTreeSeconds, "max |det - trees| = " + fmt(worst) + ", " + fmt(t) + " s"};
}

Outcome determinant_lemma() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> w(0.05, 80.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 15;
    auto edges = weighted(oracle::random_connected_graph(n, 0.3, rng), [&] { return w(rng); });
    LaplacianFactor f = reduced_laplacian(static_cast<std::size_t>(n), edges, 0);
    std::uniform_int_distribution<int> pick(0, n - 1);
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    const double gamma = w(rng);
    f.rank1_update(gamma, reduced_incidence(static_cast<PoseIndex>(a), static_cast<PoseIndex>(b), 0));
    edges.push_back({static_cast<PoseIndex>(a), static_cast<PoseIndex>(b), gamma});
    const double scratch = oracle::lu_log_det(reduced_laplacian_matrix(static_cast<std::size_t>(n), edges, 0));
    worst = std::max(worst, std::abs(f.log_det() - scratch) / std::max(1.0, std::abs(scratch)));
  }
  return {worst < kLemmaRel, "max relative error = " + fmt(worst)};
}

Outcome delta_factorization() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  int states = 0;
  while (states < 200) {
    const auto inst = fixtures::random_selection_instance(4 + states % 12, 0.2, rng);
    if (inst.cands.size() < 2) continue;
    std::vector<LoopEdgeCandidate> pool = inst.cands;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t size = std::uniform_int_distribution<std::size_t>(0, std::min<std::size_t>(4, pool.size() - 1))(rng);
    const std::vector<LoopEdgeCandidate> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
    const LoopEdgeCandidate& z = pool[size];
    const double d = inst.walk.total_length;
    LaplacianFactor f = inst.apg.factor;
    double dist = d;
    for (const auto& c : subset) {
      f.rank1_update(c.gamma, c.b);
      dist += 2.0 * c.omega;
    }
    auto with = subset;
    with.push_back(z);
    const double lhs = std::exp(objective_from_scratch(inst.apg, with, d));
    const double rhs = std::exp(objective_from_scratch(inst.apg, subset, d)) * delta(z, f, dist);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    ++states;
  }
  return {worst < kDeltaRel, "max relative error = " + fmt(worst) + " over " + std::to_string(states) + " states"};
}

constexpr std::size_t kMaxSurvivors = 10;

/*
 * For every subset S' of the candidates that survive the first pruning
 * round (capped at kMaxSurvivors), every other candidate the pruning test
 * rejects against S' must not raise the objective when added.
 */
Outcome pruning_soundness() {
  std::mt19937_64 rng(104);
  std::size_t checks = 0, violations = 0;
  int instances = 0;
  while (checks < kMinSubsetChecks || instances < 30) {
    const auto inst = fixtures::random_selection_instance(5 + instances % 8, 0.15, rng);
    ++instances;
    const double d = inst.walk.total_length;
    std::vector<LoopEdgeCandidate> survivors = prune(inst.cands, inst.apg.factor, d);
    std::shuffle(survivors.begin(), survivors.end(), rng);
    if (survivors.size() > kMaxSurvivors) survivors.resize(kMaxSurvivors);
    const std::size_t m = survivors.size();
    for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
      std::vector<LoopEdgeCandidate> subset;
      LaplacianFactor f = inst.apg.factor;
      double dist = d;
      for (std::size_t k = 0; k < m; ++k) {
        if (!(mask >> k & 1U)) continue;
        subset.push_back(survivors[k]);
        f.rank1_update(survivors[k].gamma, survivors[k].b);
        dist += 2.0 * survivors[k].omega;
      }
      if (dist > 2.0 * d) continue;
      const double base = objective_from_scratch(inst.apg, subset, d);
      for (const auto& e : inst.cands) {
        if (std::find(subset.begin(), subset.end(), e) != subset.end() || !prunable(e, f, d)) continue;
        auto with = subset;
        with.push_back(e);
        ++checks;
        if (objective_from_scratch(inst.apg, with, d) > base + kSoundnessSlack * std::max(1.0, std::abs(base))) {
          ++violations;
        }
      }
    }
  }
  return {violations == 0 && checks >= kMinSubsetChecks,
          std::to_string(checks) + " subset checks on " + std::to_string(instances) + " graphs, " +
              std::to_string(violations) + " violations"};
}

Outcome pruning_equivalence() {
  std::mt19937_64 rng(105);
  int mismatches = 0;
  std::size_t selected = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = fixtures::random_selection_instance(6 + trial % 20, 0.12, rng);
    const double d = inst.walk.total_length;
    const auto on = greedy_select(inst.apg, inst.cands, d, {true});
    const auto off = greedy_select(inst.apg, inst.cands, d, {false});
    if (on.selected != off.selected) ++mismatches;
    selected += off.selected.size();
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching sequences of 50 (" + std::to_string(selected) +
                               " selections total)"};
}

struct TableRun {
  double ratio = 0.0, speedup = 0.0;
  bool assumption_ok = true;
};

TableRun table_size(double side) {
  TableRun r;
  double t_prune = 0.0, t_full = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GridGraphSpec s;
    s.width = s.height = side;
    s.seed = seed;
    const PruneReport rep = bench_prune(gen_grid_graph(s));
    r.ratio += rep.ratio / 5.0;
    t_prune += rep.t_prune;
    t_full += rep.t_no_prune;
    r.assumption_ok = r.assumption_ok && rep.assumption_ok;
  }
  r.speedup = t_full / t_prune;
  return r;
}

bool table_assumptions_ok = true;

Outcome table_one() {
  const auto t0 = Clock::now();
  const TableRun a = table_size(10.0), b = table_size(15.0);
  const double t = seconds_since(t0);
  table_assumptions_ok = a.assumption_ok && b.assumption_ok;
  const bool pass = a.ratio <= kRatio10 && b.ratio <= kRatio15 && b.ratio < a.ratio && b.speedup >= kSpeedup15 &&
                    t < kPruneBenchSeconds;
  return {pass, "ratio 10x10 = " + fmt(a.ratio) + ", 15x15 = " + fmt(b.ratio) + ", speedup 15x15 = " +
                    fmt(b.speedup) + "x, " + fmt(t) + " s"};
}

Outcome greedy_quality() {
  std::mt19937_64 rng(107);
  double worst = 1.0;
  std::size_t largest = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = fixtures::random_selection_instance(5 + trial % 3, 0.12, rng, kMaxBruteCandidates);
    const double d = inst.walk.total_length;
    const double greedy = greedy_select(inst.apg, inst.cands, d).log_objective.back();
    const double best = brute_force_select(inst.apg, inst.cands, d).log_objective;
    worst = std::min(worst, std::exp(greedy - best));
    largest = std::max(largest, inst.cands.size());
  }
  return {worst >= kGreedyQuality,
          "worst J(greedy)/J(opt) = " + fmt(worst) + ", up to " + std::to_string(largest) + " candidates"};
}

Outcome tsp_oracle() {
  std::mt19937_64 rng(108);
  int equal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_prior_graph(2 + trial % 4, 0.4, rng);
    const MetricClosure mc(g);
    const auto h = solve_open_tsp(build_tour_costs(mc, 0));
    const double exact = oracle::brute_force_open_tsp(mc.distances(), 0);
    if (open_path_cost(mc, h) <= exact + 1e-9) ++equal;
  }
  double worst = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_prior_graph(6 + trial % 7, 0.25, rng);
    const MetricClosure mc(g);
    const TourCosts tc = build_tour_costs(mc, 0);
    worst = std::max(worst, open_path_cost(mc, solve_open_tsp(tc)) / open_path_cost(mc, solve_open_tsp_exact(tc)));
  }
  return {equal >= static_cast<int>(kTspSmallShare * 100) && worst <= kTspLargeFactor,
          std::to_string(equal) + "/100 small instances exact, worst ratio on <= 12 vertices = " + fmt(worst)};
}

Outcome pose_graph_stack() {
  std::mt19937_64 rng(109);
  double worst_ape = 0.0, worst_jac = 0.0;
  std::size_t appends = 0, lap_fail = 0, fim_fail = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = fixtures::random_selection_instance(5 + trial % 10, 0.15, rng);
    WorldModel quiet = world_from_prior(inst.g);
    quiet.noise_scale = 0.0;
    const Plan plan = plan_from_walk(inst.g, inst.mc, inst.walk);
    SimPoseGraph pg = simulate_execution(plan, quiet, 1);
    pg.estimates = optimize_pose_graph(pg).estimates;
    worst_ape = std::max(worst_ape, ape_rmse(pg.estimates, pg.truth));

    const WorldModel world = world_from_prior(inst.g);
    const Plan base = insert_loop_edges(inst.walk, {}, inst.apg, inst.mc, inst.g);
    SimPoseGraph pg0 = simulate_execution(base, world, 1);
    pg0.estimates = optimize_pose_graph(pg0).estimates;
    const double l0 = measurement_laplacian(pg0).log_dopt(), f0 = fim(pg0).log_dopt();
    for (const auto& c : inst.cands) {
      const Plan p = insert_loop_edges(inst.walk, {c}, inst.apg, inst.mc, inst.g);
      SimPoseGraph pg1 = simulate_execution(p, world, 1);
      pg1.estimates = optimize_pose_graph(pg1).estimates;
      ++appends;
      if (!(measurement_laplacian(pg1).log_dopt() > l0)) ++lap_fail;
      if (!(fim(pg1).log_dopt() > f0)) ++fim_fail;
    }
  }
  std::uniform_real_distribution<double> xy(-5.0, 5.0), th(-3.0, 3.0);
  const double h = 1e-6;
  for (int k = 0; k < 500; ++k) {
    const Pose2 xi(xy(rng), xy(rng), th(rng)), xj(xy(rng), xy(rng), th(rng));
    Pose2 z = between(xi, xj);
    z(2) = wrap_angle(z(2) + 0.3);
    const auto j = edge_jacobians(xi, xj, z);
    for (int side = 0; side < 2; ++side) {
      for (int c = 0; c < 3; ++c) {
        Pose2 p = side ? xj : xi, m = p;
        p(c) += h;
        m(c) -= h;
        const Eigen::Vector3d fd = side ? (edge_error(xi, p, z) - edge_error(xi, m, z)) / (2 * h)
                                        : (edge_error(p, xj, z) - edge_error(m, xj, z)) / (2 * h);
        const Eigen::Vector3d an = side ? j.b.col(c) : j.a.col(c);
        worst_jac = std::max(worst_jac, (fd - an).cwiseAbs().maxCoeff());
      }
    }
  }
  const bool pass = worst_ape < kApeNoiseless && worst_jac < kJacobianAbs && lap_fail == 0 && fim_fail == 0;
  return {pass, "noiseless APE = " + fmt(worst_ape) + ", Jacobian error = " + fmt(worst_jac) + ", " +
                    std::to_string(appends) + " loop-action appends with " + std::to_string(lap_fail) +
                    " Laplacian and " + std::to_string(fim_fail) + " FIM decreases"};
}

std::size_t compare_violations = 0;

Outcome strategy_ordering() {
  const auto t0 = Clock::now();
  const PriorGraph g = load_prior_graph_file(kData + "/env1_graph.json");
  const WorldModel w = load_world_file(kData + "/env1_world.json", g);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= kCompareSeeds; ++s) seeds.push_back(s);
  const Comparison c = compare_strategies(g, w, seeds);
  const double t = seconds_since(t0);
  compare_violations += c.assumption_violations;
  const MetricSummary& ape = c.summary[0];
  const bool pass = ape.slam_mean < ape.tsp_mean && ape.slam_better >= kMinImprovedSeeds &&
                    c.distance_overhead <= kMaxOverhead && t < kCompareSeconds;
  return {pass, "mean APE slam_aware = " + fmt(ape.slam_mean) + " vs tsp_only = " + fmt(ape.tsp_mean) + ", " +
                    std::to_string(ape.slam_better) + "/" + std::to_string(kCompareSeeds) +
                    " seeds improved, distance overhead = " + fmt(c.distance_overhead) + ", " + fmt(t) + " s"};
}

Outcome assumption_audit() {
  std::size_t instances = 10, violations = table_assumptions_ok ? 0 : 1;
  for (const char* env : {"env1", "env2", "env3", "env4"}) {
    const PriorGraph g = load_prior_graph_file(kData + "/" + env + "_graph.json");
    const Plan p = plan_exploration(g);
    const PruneReport r = bench_prune(g);
    instances += 1;
    if (!p.assumption_ok || !r.assumption_ok || p.walk.total_length > 2.0 * p.d_tsp) ++violations;
    const WorldModel w = load_world_file(kData + "/" + env + "_world.json", g);
    compare_violations += compare_strategies(g, w, {1, 2, 3}).assumption_violations;
  }
  violations += compare_violations;
  return {violations == 0, std::to_string(instances) + " planner instances plus mission sweeps, " +
                               std::to_string(violations) + " violations flagged"};
}

std::string cli_output(std::vector<std::string> args) {
  args.insert(args.begin(), "slamplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  if (cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
    throw std::runtime_error("command failed: " + err.str());
  }
  return out.str();
}

/// Blanks the wall-clock columns of a prune report.
std::string mask_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::string col;
    std::istringstream cs(line);
    while (std::getline(cs, col, ',')) cols.push_back(col);
    if (cols.size() > 8) cols[7] = cols[8] = "";
    for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
    out += '\n';
  }
  return out;
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> commands = {
      {"plan", kData + "/env1_graph.json"},
      {"plan", kData + "/env2_graph.json", "--strategy", "tsp_only"},
      {"simulate", kData + "/env4_graph.json", kData + "/env4_world.json", "--seed", "7"},
      {"gen-graph", kData + "/grid10.json", "--seed", "4"},
      {"compare", kData + "/env1_graph.json", kData + "/env1_world.json", "--seeds", "4"},
      {"bench-prune", kData + "/grid10.json", "--seed", "2"},
  };
  int differing = 0;
  for (const auto& c : commands) {
    std::string a = cli_output(c), b = cli_output(c);
    if (c[0] == "bench-prune") {
      a = mask_timing(a);
      b = mask_timing(b);
    }
    if (a != b) ++differing;
  }
  return {differing == 0, std::to_string(commands.size()) + " commands rerun, " + std::to_string(differing) +
                              " differing (prune timings excluded)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, matrix_tree},         {2, determinant_lemma}, {3, delta_factorization}, {4, pruning_soundness},
      {5, pruning_equivalence}, {6, table_one},         {7, greedy_quality},      {8, tsp_oracle},
      {9, pose_graph_stack},    {10, strategy_ordering}, {11, assumption_audit},  {12, determinism},
  };
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
