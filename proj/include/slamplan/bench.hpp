#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "slamplan/grid_graph.hpp"
#include "slamplan/mission.hpp"

namespace slamplan {

// ---------------------------------------------------------------------------
// Pruning benchmark
// ---------------------------------------------------------------------------

struct PruneReport {
  std::size_t vertices = 0;
  std::size_t candidates = 0;
  std::size_t after_omega_max = 0;
  std::size_t after_gain_test = 0;
  double ratio = 0.0;  // after_gain_test / candidates
  double t_prune = 0.0;
  double t_no_prune = 0.0;
  std::size_t selected = 0;
  double d_tsp = 0.0;
  double distance = 0.0;
  bool assumption_ok = true;
  std::vector<std::size_t> remaining_per_iteration;
};

/*
 * Runs greedy selection over the TSP walk of `g` with and without pruning,
 * timing each over `repeats` runs (best of). Throws SoundnessError when the
 * two selection sequences differ.
 */
inline PruneReport bench_prune(const PriorGraph& g, int repeats = 1) {
  const MetricClosure mc(g);
  const Walk walk = expand_to_walk(solve_open_tsp(build_tour_costs(mc, g.start())), mc, g);
  const AbstractedPoseGraph apg = abstract_pose_graph(walk, g);
  const auto cands = enumerate_candidates(apg, mc, g);

  using Clock = std::chrono::steady_clock;
  auto timed = [&](bool prune, double& best) {
    GreedyResult r;
    best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < std::max(1, repeats); ++k) {
      const auto t0 = Clock::now();
      r = greedy_select(apg, cands, walk.total_length, {prune});
      best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return r;
  };
  PruneReport rep;
  const GreedyResult pruned = timed(true, rep.t_prune);
  const GreedyResult full = timed(false, rep.t_no_prune);

  auto key = [](const GreedyResult& r) {
    std::vector<std::pair<PoseIndex, PoseIndex>> out;
    for (const auto& c : r.selected) out.emplace_back(c.i, c.j);
    return out;
  };
  if (key(pruned) != key(full)) {
    throw SoundnessError("pruned selection (" + std::to_string(pruned.selected.size()) +
                         " edges) differs from unpruned selection (" + std::to_string(full.selected.size()) +
                         " edges)");
  }
  rep.vertices = g.vertex_count();
  rep.candidates = pruned.candidate_count;
  rep.after_omega_max = pruned.after_omega_max;
  rep.after_gain_test = pruned.after_gain_test;
  rep.ratio = rep.candidates ? static_cast<double>(rep.after_gain_test) / static_cast<double>(rep.candidates) : 0.0;
  rep.selected = pruned.selected.size();
  rep.d_tsp = walk.total_length;
  rep.distance = pruned.distance;
  rep.assumption_ok = pruned.assumption_ok;
  rep.remaining_per_iteration = pruned.remaining_per_iteration;
  return rep;
}

inline std::string prune_report_csv_header() {
  return "label,seed,n_vertices,n_candidates,after_omega_max,after_gain_test,ratio,t_prune,t_no_prune,n_selected,"
         "d_tsp,d_plan,assumption_ok,remaining_per_iteration";
}

inline std::string prune_report_csv_row(const std::string& label, std::uint64_t seed, const PruneReport& r) {
  std::ostringstream out;
  out << label << ',' << seed << ',' << r.vertices << ',' << r.candidates << ',' << r.after_omega_max << ','
      << r.after_gain_test << ',' << format_number(r.ratio) << ',' << format_number(r.t_prune) << ','
      << format_number(r.t_no_prune) << ',' << r.selected << ',' << format_number(r.d_tsp) << ','
      << format_number(r.distance) << ',' << (r.assumption_ok ? "true" : "false") << ',';
  for (std::size_t k = 0; k < r.remaining_per_iteration.size(); ++k) {
    if (k) out << ';';
    out << r.remaining_per_iteration[k];
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kSlamAware;
  MissionMetrics metrics;
};

struct MetricSummary {
  std::string metric;
  double tsp_mean = 0.0, tsp_std = 0.0;
  double slam_mean = 0.0, slam_std = 0.0;
  std::size_t slam_better = 0, slam_worse = 0, ties = 0;  // paired by seed
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // sorted by (seed, strategy)
  std::vector<MetricSummary> summary;
  double distance_overhead = 0.0;  // mean d(slam_aware) / mean d(tsp_only) - 1
  std::size_t assumption_violations = 0;
};

/*
 * Runs one mission per (seed, strategy) on up to `threads` workers. Each
 * mission owns its state; results land in a slot fixed by its index, so the
 * report does not depend on scheduling.
 */
inline Comparison compare_strategies(const PriorGraph& g, const WorldModel& world, const std::vector<std::uint64_t>& seeds,
                                     const MissionConfig& config = {}, unsigned threads = 0) {
  if (seeds.size() < 2) throw GraphError("compare needs at least 2 seeds");
  check_world_consistency(g, world);
  const Strategy strategies[] = {Strategy::kSlamAware, Strategy::kTspOnly};
  std::vector<ComparisonRow> rows(seeds.size() * 2);
  std::vector<std::exception_ptr> errors(rows.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < rows.size();) {
      try {
        MissionConfig c = config;
        c.strategy = strategies[k % 2];
        rows[k] = {seeds[k / 2], c.strategy, run_mission(g, world, c, seeds[k / 2]).metrics};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, rows.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Comparison cmp;
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return std::pair(a.seed, to_string(a.strategy)) < std::pair(b.seed, to_string(b.strategy));
  });
  cmp.rows = rows;
  std::vector<const MissionMetrics*> slam, tsp;
  for (const auto& r : cmp.rows) {
    (r.strategy == Strategy::kSlamAware ? slam : tsp).push_back(&r.metrics);
    if (!r.metrics.assumption_ok) ++cmp.assumption_violations;
  }
  struct Field {
    const char* name;
    double MissionMetrics::*member;
    bool lower_is_better;
  };
  const Field fields[] = {{"ape_rmse", &MissionMetrics::ape_rmse, true},
                          {"d_total", &MissionMetrics::total_distance, true},
                          {"dopt_predicted", &MissionMetrics::dopt_predicted, false},
                          {"dopt_fim", &MissionMetrics::dopt_fim, false}};
  auto stats = [](const std::vector<double>& x, double& mean, double& sd) {
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  };
  for (const auto& f : fields) {
    MetricSummary s;
    s.metric = f.name;
    std::vector<double> a, b;
    for (std::size_t k = 0; k < slam.size(); ++k) {
      const double vs = slam[k]->*f.member, vt = tsp[k]->*f.member;
      a.push_back(vs);
      b.push_back(vt);
      if (vs == vt) ++s.ties;
      else if ((vs < vt) == f.lower_is_better) ++s.slam_better;
      else ++s.slam_worse;
    }
    stats(a, s.slam_mean, s.slam_std);
    stats(b, s.tsp_mean, s.tsp_std);
    cmp.summary.push_back(s);
  }
  cmp.distance_overhead = cmp.summary[1].tsp_mean > 0.0 ? cmp.summary[1].slam_mean / cmp.summary[1].tsp_mean - 1.0 : 0.0;
  return cmp;
}

inline std::string comparison_csv(const Comparison& c) {
  std::string out = metrics_csv_header() + '\n';
  for (const auto& r : c.rows) out += metrics_csv_row(r.seed, to_string(r.strategy), r.metrics) + '\n';
  return out;
}

inline std::string comparison_summary_csv(const Comparison& c) {
  std::ostringstream out;
  out << "metric,tsp_only_mean,tsp_only_std,slam_aware_mean,slam_aware_std,slam_aware_better,slam_aware_worse,ties\n";
  for (const auto& s : c.summary) {
    out << s.metric << ',' << format_number(s.tsp_mean) << ',' << format_number(s.tsp_std) << ','
        << format_number(s.slam_mean) << ',' << format_number(s.slam_std) << ',' << s.slam_better << ','
        << s.slam_worse << ',' << s.ties << '\n';
  }
  out << "distance_overhead," << format_number(c.distance_overhead) << ",,,,,,\n";
  out << "assumption_violations," << c.assumption_violations << ",,,,,,\n";
  return out.str();
}

}  // namespace slamplan
