#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "madiag/checks.hpp"
#include "madiag/config.hpp"
#include "madiag/report.hpp"

namespace madiag {

struct SuiteConfig {
  std::vector<std::string> suites;     // subset of {diagrams, identities, bounds}; empty = all
  std::vector<std::string> instances;  // instance names; empty = default roster
  std::vector<std::string> only_ids;   // restrict to these check ids; empty = all
  int points = 20;
  int bound_points = 50;
  double tol_override = 0.0;
  std::uint64_t seed = 42;
  int jobs = 1;
};

namespace suite_detail {

inline std::vector<std::string> default_identity_instances() {
  return {"quadratic_id2", "manufactured2:42", "orthant2", "sine1d"};
}

inline std::vector<std::string> default_bound_instances() {
  return {"orthant2",          "sine1d",
          "gauss_pair:0.5",    "transport:gauss:quartic",
          "perturbed_gauss:0.2"};
}

}  // namespace suite_detail

/// Runs the configured suites and aggregates a Report. Checks are
/// independent jobs; each draws its own seeded point sample, so the report
/// is byte-identical across runs and job counts (wall time aside).
inline Report run_suite(const SuiteConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> suites = cfg.suites;
  if (suites.empty()) suites = {"diagrams", "identities", "bounds"};
  auto has_suite = [&suites](const char* s) {
    return std::find(suites.begin(), suites.end(), s) != suites.end();
  };
  auto wants_id = [&cfg](const std::string& id) {
    return cfg.only_ids.empty() ||
           std::find(cfg.only_ids.begin(), cfg.only_ids.end(), id) != cfg.only_ids.end();
  };

  Report rep;
  rep.suite = suites.size() == 1 ? suites[0] : "all";
  rep.seed = cfg.seed;

  // resolve instances per suite
  std::vector<std::string> id_names =
      cfg.instances.empty() ? suite_detail::default_identity_instances() : cfg.instances;
  std::vector<std::string> bd_names =
      cfg.instances.empty() ? suite_detail::default_bound_instances() : cfg.instances;

  std::vector<std::string> roster = id_names;
  for (const auto& n : bd_names)
    if (std::find(roster.begin(), roster.end(), n) == roster.end()) roster.push_back(n);

  std::vector<std::pair<std::string, PotentialInstance>> cache;
  auto instance_of = [&cache](const std::string& name) -> const PotentialInstance& {
    for (auto& [n, i] : cache)
      if (n == name) return i;
    cache.emplace_back(name, make_instance(name));
    // admission: the equation must hold on a probe sample
    const PotentialInstance& inst = cache.back().second;
    Rng rng(derive_seed(1234, name));
    Box box = inst.sample_box();
    for (int k = 0; k < 10; ++k) {
      Vec x = sample_point(box, rng);
      if (std::abs(inst.ma_residual(x)) > 1e-10)
        throw EvalError(name + ": Monge-Ampere residual too large for admission");
    }
    return cache.back().second;
  };
  for (const auto& n : roster) rep.instances.push_back(n);

  // materialize jobs
  struct Job {
    const CheckDef* def;
    std::string instance_name;
    CheckContext ctx;
  };
  static const std::vector<CheckDef> defs = all_checks();
  std::vector<Job> jobs;
  if (has_suite("identities")) {
    for (const auto& d : defs) {
      if (d.suite != "identities" || !wants_id(d.id)) continue;
      for (const auto& n : id_names) jobs.push_back({&d, n, {cfg.points, cfg.tol_override, cfg.seed}});
    }
  }
  if (has_suite("bounds")) {
    for (const auto& d : defs) {
      if (d.suite != "bounds" || !wants_id(d.id)) continue;
      for (const auto& n : bd_names)
        jobs.push_back({&d, n, {cfg.bound_points, cfg.tol_override, cfg.seed}});
    }
  }

  // instances are constructed up front (transport solves are not thread-safe
  // to duplicate needlessly); job execution is pure afterwards
  for (const auto& j : jobs) (void)instance_of(j.instance_name);

  std::vector<CheckResult> results(jobs.size());
  std::vector<char> keep(jobs.size(), 1);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t q = next.fetch_add(1);
      if (q >= jobs.size()) break;
      const Job& j = jobs[q];
      const PotentialInstance& inst = instance_of(j.instance_name);
      if (!j.def->applies(inst)) {
        // roster-driven runs drop inapplicable pairs quietly; explicitly
        // requested ids surface the tag mismatch as a skip
        if (std::find(cfg.only_ids.begin(), cfg.only_ids.end(), j.def->id) !=
            cfg.only_ids.end()) {
          results[q] = CheckResult::skipped(j.def->id, inst.name(),
                                            "tag mismatch: check does not apply to this instance");
        } else {
          keep[q] = 0;
        }
        continue;
      }
      try {
        results[q] = j.def->run(inst, j.ctx);
      } catch (const std::exception& e) {
        results[q] = CheckResult::skipped(j.def->id, inst.name(), e.what());
      }
    }
  };
  const int nthreads = std::max(1, cfg.jobs);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (has_suite("diagrams") && (cfg.only_ids.empty() || wants_id("fig1_d3_parse") ||
                                wants_id("fig3_derivative") || wants_id("cor32_diagram") ||
                                wants_id("lphi3_diagram") || wants_id("lg_diagram") ||
                                wants_id("k3_from_k2"))) {
    for (auto& r : run_diagram_assertions())
      if (wants_id(r.id)) rep.checks.push_back(std::move(r));
  }
  for (std::size_t q = 0; q < jobs.size(); ++q)
    if (keep[q]) rep.checks.push_back(std::move(results[q]));

  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace madiag
