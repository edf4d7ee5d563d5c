// Command-line front end: diagram manipulation, instance solving, suite
// execution and report emission.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "madiag/config.hpp"
#include "madiag/dsl.hpp"
#include "madiag/geometry.hpp"
#include "madiag/index_expression.hpp"
#include "madiag/rewrite.hpp"
#include "madiag/suite.hpp"
#include "madiag/torus2d.hpp"
#include "madiag/transport1d.hpp"

namespace {

using namespace madiag;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailures = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRewrite = 3;
constexpr int kExitNumeric = 4;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw EvalError("cannot write " + path);
  f << content;
}

std::string tensor_to_json(const DenseTensor& t) {
  std::function<std::string(std::vector<int>&, int)> rec = [&](std::vector<int>& idx,
                                                               int depth) -> std::string {
    if (depth == t.order()) {
      std::ostringstream os;
      os << t.at(idx);
      return os.str();
    }
    std::string s = "[";
    for (int i = 0; i < t.dim(); ++i) {
      idx.push_back(i);
      if (i) s += ", ";
      s += rec(idx, depth + 1);
      idx.pop_back();
    }
    return s + "]";
  };
  std::vector<int> idx;
  return rec(idx, 0);
}

Vec parse_point(const std::string& at, int dim) {
  Vec x;
  std::stringstream ss(at);
  std::string tok;
  while (std::getline(ss, tok, ',')) x.push_back(std::stod(tok));
  if (static_cast<int>(x.size()) != dim)
    throw EvalError("--at needs " + std::to_string(dim) + " comma-separated coordinates");
  return x;
}

struct DiagramArgs {
  std::string action;
  std::string expr;
  std::string expr2;
  int k = 1;
  bool elim = false;
  std::string instance;
  std::string at;
  std::string dot_path;
};

int cmd_diagram(const DiagramArgs& a) {
  DiagramSum input = parse_diagrams(a.expr);
  DiagramSum result;
  if (a.action == "canon") {
    result = input;
  } else if (a.action == "laplacian") {
    result = weighted_laplacian(input);
    if (a.elim) result = eliminate_loops(result);
  } else if (a.action == "derive") {
    // symmetric-tensor derivative: legs are treated as interchangeable and
    // the (symmetric) result is collected in symmetric mode
    result = symmetrize(covariant_derivative(symmetrize(input)));
  } else if (a.action == "contract") {
    if (a.expr2.empty()) throw EvalError("contract needs --expr2");
    result = contract(symmetrize(input), symmetrize(parse_diagrams(a.expr2)), a.k);
  } else if (a.action == "elim") {
    result = eliminate_loops(input);
  } else if (a.action == "index") {
    DiagramSum s = input;
    IndexExpression e =
        to_index_expression(s, s.all_labeled() && s.leg_count() > 0 ? IndexMode::Labeled
                                                                    : IndexMode::Symmetric);
    std::cout << render_index_expression(e) << "\n";
    return kExitOk;
  } else if (a.action == "eval") {
    if (a.instance.empty() || a.at.empty())
      throw EvalError("eval needs --instance and --at");
    PotentialInstance inst = make_instance(a.instance);
    Vec x = parse_point(a.at, inst.dim());
    if (!inst.in_domain(x)) throw EvalError("--at point is outside the instance domain");
    DenseTensor t = evaluate_diagram(input, inst, x);
    std::cout << tensor_to_json(t) << "\n";
    return kExitOk;
  } else {
    throw EvalError("unknown diagram action '" + a.action + "'");
  }
  std::cout << render_diagrams(result) << "\n";
  if (!a.dot_path.empty()) write_file(a.dot_path, render_dot(result));
  return kExitOk;
}

struct VerifyArgs {
  std::string suite = "all";
  bool points_set = false, bound_points_set = false, seed_set = false, jobs_set = false;
  std::vector<std::string> instances;
  std::vector<std::string> ids;
  int points = 20;
  int bound_points = 50;
  double tol = 0.0;
  std::uint64_t seed = 42;
  int jobs = 1;
  std::string json_path;
  std::string csv_path;
  std::string config_path;
};

int cmd_verify(const VerifyArgs& a) {
  SuiteConfig cfg;
  if (!a.config_path.empty()) {
    nlohmann::json j = read_config_file(a.config_path);
    if (j.contains("suites"))
      for (const auto& s : j["suites"]) cfg.suites.push_back(s.get<std::string>());
    if (j.contains("instances"))
      for (const auto& s : j["instances"]) cfg.instances.push_back(s.get<std::string>());
    if (j.contains("ids"))
      for (const auto& s : j["ids"]) cfg.only_ids.push_back(s.get<std::string>());
    cfg.points = j.value("points", cfg.points);
    cfg.bound_points = j.value("bound_points", cfg.bound_points);
    cfg.tol_override = j.value("tol", cfg.tol_override);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
  }
  if (a.suite != "all") cfg.suites = {a.suite};
  if (!a.instances.empty()) cfg.instances = a.instances;
  if (!a.ids.empty()) cfg.only_ids = a.ids;
  if (a.points_set || a.config_path.empty()) cfg.points = a.points;
  if (a.bound_points_set || a.config_path.empty()) cfg.bound_points = a.bound_points;
  if (a.tol > 0) cfg.tol_override = a.tol;
  if (a.seed_set || a.config_path.empty()) cfg.seed = a.seed;
  if (a.jobs_set || a.config_path.empty()) cfg.jobs = a.jobs;

  Report rep = run_suite(cfg);
  for (const auto& c : rep.checks) {
    std::cout << status_str(c.status) << "  " << c.id << "  [" << c.instance
              << "]  residual " << c.max_abs_residual << " (tol " << c.tolerance << ")\n";
  }
  std::cout << rep.checks.size() << " checks, " << rep.failures() << " failures, "
            << rep.wall_time_ms << " ms\n";
  if (!a.json_path.empty()) write_file(a.json_path, report_to_json(rep));
  if (!a.csv_path.empty()) {
    write_file(a.csv_path, report_to_csv(rep));
    write_file(a.csv_path + ".points.csv", traces_to_csv(rep));
  }
  return rep.all_passed() ? kExitOk : kExitCheckFailures;
}

struct SolveArgs {
  std::string kind;
  std::string source = "gauss";
  std::string target = "gauss";
  std::string vpert = "0";
  std::string wpert = "0";
  int grid = 64;
  std::string out;
};

int cmd_solve(const SolveArgs& a) {
  if (a.kind == "transport1d") {
    auto impl = std::make_shared<Transport1dImpl>(make_density_1d(a.source),
                                                  make_density_1d(a.target));
    PotentialInstance inst{impl};
    Box box = inst.sample_box();
    double ma = 0.0, quant = 0.0, p2lo = 1e300, p2hi = -1e300;
    const int m = 101;
    for (int k = 0; k < m; ++k) {
      const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * k / (m - 1);
      ma = std::max(ma, std::abs(inst.ma_residual({x})));
      quant = std::max(quant, impl->quantile_residual(x));
      const double p2 = inst.phi(2, {x})[0];
      p2lo = std::min(p2lo, p2);
      p2hi = std::max(p2hi, p2);
    }
    const std::string out = a.out.empty() ? "transport1d_out" : a.out;
    export_transport_instance(inst, a.source, a.target, out);
    nlohmann::ordered_json s;
    s["instance"] = inst.name();
    s["ma_residual_max"] = ma;
    s["quantile_residual_max"] = quant;
    s["legendre_dual_residual"] = legendre_dual_residual_1d(inst);
    s["d2phi_min"] = p2lo;
    s["d2phi_max"] = p2hi;
    s["files"] = {out + ".bin", out + ".json"};
    std::cout << s.dump(2) << "\n";
    return kExitOk;
  }
  if (a.kind == "torus2d") {
    TorusSolveReport rep;
    auto impl = std::make_shared<Torus2dImpl>(TrigPoly::parse(a.vpert),
                                              TrigPoly::parse(a.wpert), a.grid, &rep);
    const std::string out = a.out.empty() ? "torus2d_out" : a.out;
    export_torus_instance(*impl, a.vpert, a.wpert, rep.residual, rep.newton_steps, out);
    nlohmann::ordered_json s;
    s["instance"] = impl->name();
    s["residual"] = rep.residual;
    s["newton_steps"] = rep.newton_steps;
    s["files"] = {out + ".bin", out + ".json"};
    std::cout << s.dump(2) << "\n";
    return kExitOk;
  }
  throw EvalError("unknown solve kind '" + a.kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-diagram calculus and numeric verification for Hessian metrics of "
               "Monge-Ampere type"};
  app.require_subcommand(1);

  DiagramArgs da;
  CLI::App* diagram = app.add_subcommand("diagram", "manipulate or evaluate diagram sums");
  diagram->add_option("action", da.action,
                      "canon | laplacian | derive | contract | elim | index | eval")
      ->required();
  diagram->add_option("--expr", da.expr, "diagram sum in the index DSL")->required();
  diagram->add_option("--expr2", da.expr2, "second operand for contract");
  diagram->add_option("--k", da.k, "contraction order for contract");
  diagram->add_flag("--elim", da.elim, "eliminate loops after the operation");
  diagram->add_option("--instance", da.instance, "instance name for eval");
  diagram->add_option("--at", da.at, "evaluation point, comma separated");
  diagram->add_option("--dot", da.dot_path, "write Graphviz DOT to this path");

  VerifyArgs va;
  CLI::App* verify = app.add_subcommand("verify", "run identity/bound/diagram suites");
  verify->add_option("suite", va.suite, "identities | bounds | diagrams | all (default all)")
      ->check(CLI::IsMember({"identities", "bounds", "diagrams", "all"}));
  verify->add_option("--instance", va.instances, "restrict to these instances");
  verify->add_option("--id", va.ids, "restrict to these check ids");
  verify->add_option("--points", va.points, "points per identity check")
      ->each([&va](const std::string&) { va.points_set = true; });
  verify->add_option("--bound-points", va.bound_points, "points per bound check")
      ->each([&va](const std::string&) { va.bound_points_set = true; });
  verify->add_option("--tol", va.tol, "tolerance override");
  verify->add_option("--seed", va.seed, "sampling seed")
      ->each([&va](const std::string&) { va.seed_set = true; });
  verify->add_option("--jobs", va.jobs, "parallel check jobs")
      ->each([&va](const std::string&) { va.jobs_set = true; });
  verify->add_option("--json", va.json_path, "write the JSON report here");
  verify->add_option("--csv", va.csv_path,
                     "write the CSV report here (plus .points.csv with per-point residuals)");
  verify->add_option("--config", va.config_path, "TOML/JSON suite config file");

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand("solve", "solve for a potential instance");
  solve->add_option("kind", sa.kind, "transport1d | torus2d")->required();
  solve->add_option("--source", sa.source, "source density spec (gauss, gauss:VAR, quartic)");
  solve->add_option("--target", sa.target, "target density spec");
  solve->add_option("--vpert", sa.vpert, "torus source perturbation, e.g. \"0.05*cos(x1)\"");
  solve->add_option("--wpert", sa.wpert, "torus target perturbation");
  solve->add_option("--grid", sa.grid, "torus grid size per axis");
  solve->add_option("--out", sa.out, "output path base for instance export");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*diagram) return cmd_diagram(da);
    if (*verify) return cmd_verify(va);
    if (*solve) return cmd_solve(sa);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RewriteError& e) {
    std::cerr << "rewrite error: " << e.what() << "\n";
    return kExitRewrite;
  } catch (const EvalError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
