// jflow: run implicit Euler trajectories and property suites on problem files.
//
// Exit codes: 0 pass, 1 property violation, 2 usage/config error, 3 inapplicable request,
// 4 numerical failure (solver did not converge).

#include "jflow/io.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace jflow;

namespace {

constexpr int kPass = 0, kViolation = 1, kUsage = 2, kInapplicable = 3, kNumerical = 4;

struct Inapplicable : Error {
  using Error::Error;
};

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

Vector perturbation(Index n, std::uint64_t seed, double size) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = size * normal(rng);
  return v;
}

struct RunArgs {
  std::string problem, out = ".";
  std::optional<double> T, tau, tol;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& a) {
  const Problem pr = load_problem(a.problem);
  const double T = a.T.value_or(pr.T), tau = a.tau.value_or(pr.tau);
  if (!(tau > 0.0) || !(T >= tau)) throw ConfigError("need tau > 0 and T >= tau");
  const std::uint64_t seed = a.seed.value_or(pr.seed);
  const fs::path out = prepare_out(a.out);

  EvolveOptions eo;
  if (a.tol) eo.tol = *a.tol;
  const JEllipticPair& pair = pr.pair;
  const Vector u0 = pr.initial ? *pr.initial : ImageSampler(pair, seed).next();
  const Vector v0 = project_onto_image(pair, Vector(u0 + perturbation(u0.size(), seed + 1, 0.1)));

  Trajectory tr;
  try {
    tr = evolve(pair, u0, T, tau, eo);
  } catch (const EvolveError& e) {
    std::ofstream csv(out / "trajectory.csv");
    write_trajectory_csv(csv, e.partial());
    std::cerr << "jflow run: " << e.what() << '\n';
    return kNumerical;
  }
  {
    std::ofstream csv(out / "trajectory.csv");
    write_trajectory_csv(csv, tr);
  }

  EvolveOptions quiet = eo;
  quiet.record_energies = false;
  const Trajectory tv = evolve(pair, v0, T, tau, quiet);
  // Implicit Euler of an omega-shifted monotone operator expands by at most 1/(1 - tau omega) per step.
  const double factor = pair.omega > 0.0 ? 1.0 / (1.0 - tau * pair.omega) : 1.0;
  double contraction = -kInfinity, prev = norm(pair.H, Vector(tr.states[0] - tv.states[0]));
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double cur = norm(pair.H, Vector(tr.states[k] - tv.states[k]));
    contraction = std::max(contraction, cur - factor * prev);
    prev = cur;
  }
  const double dissipation = dissipation_excess(pair.H, tr, tau);

  Json s;
  s["problem"] = pr.name;
  s["kind"] = pr.kind;
  s["T"] = T;
  s["tau"] = tau;
  s["seed"] = seed;
  s["omega"] = pair.omega;
  s["steps"] = tr.size() - 1;
  s["initial_energy"] = tr.energies.front();
  s["final_energy"] = tr.energies.back();
  s["dissipation"] = {{"max_excess", dissipation}, {"tolerance", 1e-7}, {"passed", dissipation <= 1e-7}};
  s["contraction"] = {{"max_increase", contraction},
                      {"step_factor", factor},
                      {"tolerance", 1e-8},
                      {"passed", contraction <= 1e-8}};
  s["timestamp"] = timestamp();
  write_json(out / "summary.json", s);
  const bool ok = dissipation <= 1e-7 && contraction <= 1e-8;
  std::cout << "trajectory: " << tr.size() << " states, final energy " << tr.energies.back()
            << (ok ? "; dissipation and contraction checks passed\n" : "; a summary check FAILED\n");
  return ok ? kPass : kViolation;
}

struct CheckArgs {
  std::string problem, out = ".", suite = "default";
  std::uint64_t seed = 0;
  std::optional<int> samples, trajectories;
  std::optional<double> tol;
};

const std::vector<std::string> kSuites = {"default", "positivity", "order", "linf", "l1",
                                          "complete", "interpolation", "domination", "comparison"};

bool g_vanishes(const Problem& pr) {
  if (pr.kind != "robin" && pr.kind != "dtn") return true;
  const Json& law = pr.source.contains("law") ? pr.source["law"] : Json();
  if (!law.contains("g")) return true;
  const Json& g = law["g"];
  if (g.value("kind", std::string("zero")) != "linear") return true;
  const auto params = g.value("params", std::vector<double>{});
  return params.size() < 2 || params[1] == 0.0;
}

std::vector<PropertyReport> run_suite(const Problem& pr, const std::string& suite, const CheckOptions& opt,
                                      std::vector<std::string>& notes) {
  const JEllipticPair& pair = pr.pair;
  const ConvexSetOracle H = ConvexSetOracle::whole_space(), cone = ConvexSetOracle::positive_cone();
  const bool convex = pair.omega == 0.0;
  std::vector<PropertyReport> out;
  auto need_convex = [&](const std::string& what) {
    if (!convex) throw Inapplicable(what + " requires a convex pair (omega = 0)");
  };
  auto need_reference = [&](const std::string& rel) {
    if (!pr.reference) throw Inapplicable(rel + " requested but the problem names no reference pair");
  };

  if (suite == "positivity") {
    out.push_back(check_invariance(pair, cone, opt));
  } else if (suite == "order") {
    out.push_back(check_order_preserving(pair, H, opt));
  } else if (suite == "linf") {
    need_convex("L-infinity contractivity");
    out.push_back(check_linf_contractivity(pair, opt));
  } else if (suite == "l1") {
    need_convex("L1 contractivity");
    out.push_back(check_l1_contractivity(pair, opt));
  } else if (suite == "complete") {
    need_convex("complete contractivity");
    out.push_back(check_complete_contractivity(pair, default_psi_family(), opt));
  } else if (suite == "interpolation") {
    need_convex("interpolation consistency");
    out.push_back(check_interpolation_consistency(pair, opt));
  } else if (suite == "domination") {
    need_reference("domination");
    try {
      out.push_back(check_domination(pair, pr.reference->pair, opt));
    } catch (const PreconditionError& e) {
      throw Inapplicable(e.what());
    }
  } else if (suite == "comparison") {
    need_reference("comparison");
    out.push_back(check_comparison(pair, pr.reference->pair, H, opt));
  } else if (suite == "default") {
    if (g_vanishes(pr)) out.push_back(check_invariance(pair, cone, opt));
    else notes.push_back("positivity skipped: g(0) != 0");
    out.push_back(check_order_preserving(pair, H, opt));
    if (convex) {
      out.push_back(check_linf_contractivity(pair, opt));
      out.push_back(check_complete_contractivity(pair, default_psi_family(), opt));
    } else {
      notes.push_back("contractivity checks skipped: pair is only semiconvex");
    }
    if (pr.reference) {
      if (pr.relation == "domination") {
        try {
          out.push_back(check_domination(pair, pr.reference->pair, opt));
        } catch (const PreconditionError& e) {
          notes.push_back(std::string("domination not applicable: ") + e.what());
        }
      } else {
        out.push_back(check_comparison(pair, pr.reference->pair, H, opt));
      }
    }
  } else {
    throw ConfigError("unknown suite '" + suite + "'");
  }
  return out;
}

int cmd_check(const CheckArgs& a) {
  const Problem pr = load_problem(a.problem);
  CheckOptions opt;
  opt.seed = a.seed;
  opt.T = pr.T;
  opt.tau = pr.tau;
  if (a.samples) opt.samples = *a.samples;
  if (a.trajectories) opt.trajectories = *a.trajectories;
  if (a.tol) opt.resolvent_tol = *a.tol;
  if (pr.pair.omega > 0.0) opt.resolvent_lambdas = {std::min(opt.tau, 0.5 / pr.pair.omega)};
  const fs::path out = prepare_out(a.out);

  std::vector<std::string> notes;
  std::vector<PropertyReport> reports;
  try {
    reports = run_suite(pr, a.suite, opt, notes);
  } catch (const Inapplicable& e) {
    std::cerr << "jflow check: " << e.what() << '\n';
    return kInapplicable;
  }

  bool all = true;
  Json j;
  j["tool"] = "jflow";
  j["problem"] = pr.name;
  j["kind"] = pr.kind;
  j["seed"] = a.seed;
  j["suite"] = a.suite;
  j["checks"] = Json::array();
  for (const auto& r : reports) {
    all = all && r.passed;
    j["checks"].push_back(to_json(r));
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_violation=" << format_double(r.max_violation)
              << '\n';
  }
  j["notes"] = notes;
  j["passed"] = all;
  j["timestamp"] = timestamp();
  write_json(out / "report.json", j);
  return all ? kPass : kViolation;
}

int cmd_list() {
  const char* blurbs[] = {
      "Robin p-Laplacian on a chain/grid; j = restriction to interior nodes",
      "Dirichlet-to-Neumann problem; j = trace on boundary nodes (non-injective)",
      "parabolic-elliptic coupled system; j = restriction to the subdomain",
      "Dirichlet p-Laplacian (zero outside the subdomain); j = identity",
      "Neumann p-Laplacian; j = identity",
      "anisotropic total variation on the interior; j = restriction to the subdomain",
      "quadratic energy (1/2) x^T Q x with node weights; j = identity",
  };
  for (std::size_t k = 0; k < problem_kinds().size(); ++k)
    std::cout << problem_kinds()[k] << "\t" << blurbs[k] << '\n';
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jflow: gradient flows of j-elliptic functionals"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "evolve a problem and write trajectory.csv and summary.json");
  run_cmd->add_option("--problem", run.problem, "problem file (JSON)")->required();
  run_cmd->add_option("--T", run.T, "final time");
  run_cmd->add_option("--tau", run.tau, "time step");
  run_cmd->add_option("--seed", run.seed, "seed for the sampled initial datum");
  run_cmd->add_option("--tol", run.tol, "resolvent tolerance");
  run_cmd->add_option("--out", run.out, "output directory");

  CheckArgs check;
  auto* check_cmd = app.add_subcommand("check", "run a property suite and write report.json");
  check_cmd->add_option("--problem", check.problem, "problem file (JSON)")->required();
  check_cmd->add_option("--seed", check.seed, "sampling seed")->required();
  check_cmd->add_option("--suite", check.suite, "suite name")->check(CLI::IsMember(kSuites));
  check_cmd->add_option("--samples", check.samples, "functional-level samples per check");
  check_cmd->add_option("--trajectories", check.trajectories, "initial data per dynamic check");
  check_cmd->add_option("--tol", check.tol, "resolvent tolerance");
  check_cmd->add_option("--out", check.out, "output directory");

  app.add_subcommand("list-problems", "list the built-in problem kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*check_cmd) return cmd_check(check);
    return cmd_list();
  } catch (const ConfigError& e) {
    std::cerr << "jflow: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "jflow: " << e.what() << '\n';
    return kNumerical;
  }
}
