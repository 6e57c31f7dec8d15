#pragma once

// Problem files (JSON) and serialization of reports and trajectories.

#include "jflow/problems.hpp"
#include "jflow/properties.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jflow {

using Json = nlohmann::json;

/// Malformed or unsupported configuration (as opposed to a numerical failure).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Problem {
  std::string kind;
  std::string name;
  JEllipticPair pair;
  std::shared_ptr<Problem> reference;  // comparison partner, when the file names one
  std::string relation;                // "domination" or "comparison"
  double T = 1.0;
  double tau = 0.05;
  std::uint64_t seed = 0;
  std::optional<Vector> initial;
  Json source;
};

inline const std::vector<std::string>& problem_kinds() {
  static const std::vector<std::string> kinds = {"robin", "dtn", "coupled", "dirichlet", "neumann", "tv", "quadratic"};
  return kinds;
}

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline Vector to_vector(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be an array of numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline std::vector<bool> index_mask(const GridSpec& g, const Json& spec, const char* what) {
  std::vector<bool> m(static_cast<std::size_t>(g.nodes()), false);
  auto mark = [&](Index i) {
    if (i < 0 || i >= g.nodes()) throw ConfigError(std::string(what) + ": node index out of range");
    m[static_cast<std::size_t>(i)] = true;
  };
  if (spec.is_array()) {
    for (const auto& x : spec) mark(x.get<Index>());
  } else if (spec.is_object() && spec.contains("lo") && spec.contains("hi")) {
    const Json &lo = spec["lo"], &hi = spec["hi"];
    const Index i0 = lo.is_array() ? lo[0].get<Index>() : lo.get<Index>();
    const Index i1 = hi.is_array() ? hi[0].get<Index>() : hi.get<Index>();
    const Index j0 = lo.is_array() && lo.size() > 1 ? lo[1].get<Index>() : 0;
    const Index j1 = hi.is_array() && hi.size() > 1 ? hi[1].get<Index>() : 0;
    for (Index j = j0; j <= j1; ++j)
      for (Index i = i0; i <= i1; ++i) {
        if (i < 0 || i >= g.nx() || j < 0 || j >= g.ny()) throw ConfigError(std::string(what) + ": box out of range");
        mark(g.node(i, j));
      }
  } else {
    throw ConfigError(std::string(what) + " must be an index list or {\"lo\", \"hi\"}");
  }
  return m;
}

inline GridSpec parse_grid(const Json& j) {
  if (!j.is_object()) throw ConfigError("missing 'grid' object");
  const std::string topo = get_or<std::string>(j, "topology", "chain");
  const double h = get_or<double>(j, "h", 0.0);
  GridSpec g = GridSpec::chain(2);
  if (topo == "chain") {
    const Index n = get_or<Index>(j, "n", 0);
    if (n < 2) throw ConfigError("grid.n must be >= 2");
    g = GridSpec::chain(n, h);
  } else if (topo == "grid") {
    const Index nx = get_or<Index>(j, "nx", 0), ny = get_or<Index>(j, "ny", get_or<Index>(j, "nx", 0));
    if (nx < 2 || ny < 2) throw ConfigError("grid.nx and grid.ny must be >= 2");
    g = GridSpec::grid(nx, ny, h);
  } else {
    throw ConfigError("unknown grid topology '" + topo + "'");
  }
  if (j.contains("boundary")) g.set_boundary(index_mask(g, j["boundary"], "grid.boundary"));
  if (j.contains("subdomain")) g.set_subdomain(index_mask(g, j["subdomain"], "grid.subdomain"));
  return g;
}

inline ScalarLaw parse_law(const Json& j) {
  ScalarLaw law;
  if (j.is_null()) return law;
  if (j.contains("g")) {
    const Json& g = j["g"];
    const std::string kind = get_or<std::string>(g, "kind", "zero");
    if (kind == "zero") law.g = ScalarLaw::GKind::zero;
    else if (kind == "linear") law.g = ScalarLaw::GKind::linear;
    else if (kind == "sine") law.g = ScalarLaw::GKind::sine;
    else if (kind == "tanh") law.g = ScalarLaw::GKind::tanh;
    else throw ConfigError("unknown g kind '" + kind + "'");
    law.g_params = get_or<std::vector<double>>(g, "params", {});
    law.lipschitz = get_or<double>(g, "L", 0.0);
  }
  if (j.contains("beta")) {
    const Json& b = j["beta"];
    const std::string kind = get_or<std::string>(b, "kind", "zero");
    if (kind == "zero") law.beta = ScalarLaw::BetaKind::zero;
    else if (kind == "linear") law.beta = ScalarLaw::BetaKind::linear;
    else if (kind == "power") law.beta = ScalarLaw::BetaKind::power;
    else throw ConfigError("unknown beta kind '" + kind + "'");
    law.beta_params = get_or<std::vector<double>>(b, "params", {});
  }
  return law;
}

}  // namespace detail

inline Problem parse_problem(const Json& j) {
  if (!j.is_object()) throw ConfigError("problem file must contain a JSON object");
  Problem pr;
  pr.source = j;
  pr.kind = detail::get_or<std::string>(j, "problem", "");
  pr.name = detail::get_or<std::string>(j, "name", pr.kind);
  pr.T = detail::get_or<double>(j, "T", 1.0);
  pr.tau = detail::get_or<double>(j, "tau", 0.05);
  pr.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  const std::optional<double> omega =
      j.contains("omega") && !j["omega"].is_null() ? std::optional<double>(j["omega"].get<double>()) : std::nullopt;
  const double p = detail::get_or<double>(j, "p", 2.0);

  try {
    if (pr.kind == "quadratic") {
      if (!j.contains("Q") || !j["Q"].is_array()) throw ConfigError("quadratic problem needs a matrix 'Q'");
      const Index n = static_cast<Index>(j["Q"].size());
      Matrix Q(n, n);
      for (Index r = 0; r < n; ++r) {
        const Vector row = detail::to_vector(j["Q"][static_cast<std::size_t>(r)], "Q row");
        if (row.size() != n) throw ConfigError("Q must be square");
        Q.row(r) = row.transpose();
      }
      const Vector w = j.contains("weights") ? detail::to_vector(j["weights"], "weights") : Vector::Ones(n);
      pr.pair = build_quadratic(Q, w);
      if (omega) pr.pair.omega = *omega;
    } else {
      const bool known = std::find(problem_kinds().begin(), problem_kinds().end(), pr.kind) != problem_kinds().end();
      if (!known) throw ConfigError("unknown problem kind '" + pr.kind + "'");
      const GridSpec grid = detail::parse_grid(j.contains("grid") ? j["grid"] : Json());
      const ScalarLaw law = detail::parse_law(j.contains("law") ? j["law"] : Json());
      if (pr.kind == "robin") pr.pair = build_robin(grid, p, law, omega);
      else if (pr.kind == "dtn") pr.pair = build_dtn(grid, p, law, omega);
      else if (pr.kind == "coupled") pr.pair = build_coupled(grid, p);
      else if (pr.kind == "dirichlet") pr.pair = build_dirichlet(grid, p);
      else if (pr.kind == "neumann") pr.pair = build_neumann(grid, p);
      else pr.pair = build_tv(grid);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed problem file: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  pr.pair.name = pr.name;

  if (j.contains("initial")) pr.initial = detail::to_vector(j["initial"], "initial");
  if (pr.initial && pr.initial->size() != pr.pair.h_dim())
    throw ConfigError("initial datum has dimension " + std::to_string(pr.initial->size()) + ", expected " +
                      std::to_string(pr.pair.h_dim()));
  if (j.contains("reference")) {
    const Json& ref = j["reference"];
    pr.relation = detail::get_or<std::string>(ref, "relation", "domination");
    if (pr.relation != "domination" && pr.relation != "comparison")
      throw ConfigError("reference.relation must be 'domination' or 'comparison'");
    if (!ref.contains("problem")) throw ConfigError("reference needs a 'problem' object");
    pr.reference = std::make_shared<Problem>(parse_problem(ref["problem"]));
    if (pr.reference->pair.h_dim() != pr.pair.h_dim())
      throw ConfigError("reference pair lives on a different H");
  }
  return pr;
}

inline Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return parse_problem(j);
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const PropertyReport& r) {
  Json j;
  j["name"] = r.name;
  j["passed"] = r.passed;
  j["max_violation"] = std::isfinite(r.max_violation) ? Json(r.max_violation) : Json(nullptr);
  j["tolerance"] = r.tolerance;
  j["trials"] = r.trials;
  j["skipped"] = r.skipped;
  j["agreement"] = r.agreement;
  j["witness"] = r.witness;
  j["witness_label"] = r.witness_label;
  if (!r.notes.empty()) j["notes"] = r.notes;
  if (!r.parts.empty()) {
    j["parts"] = Json::array();
    for (const auto& p : r.parts) j["parts"].push_back(to_json(p));
  }
  return j;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// t, node_0..node_{m-1}, energy, step_residual
inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  const Index m = tr.states.empty() ? 0 : tr.states.front().size();
  out << "t";
  for (Index i = 0; i < m; ++i) out << ",node_" << i;
  out << ",energy,step_residual\n";
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    out << format_double(tr.times[k]);
    for (Index i = 0; i < m; ++i) out << ',' << format_double(tr.states[k][i]);
    out << ',' << (k < tr.energies.size() ? format_double(tr.energies[k]) : std::string("nan"));
    out << ',' << format_double(k < tr.step_residuals.size() ? tr.step_residuals[k] : 0.0) << '\n';
  }
}

/// Largest excess in  E0(u_{k+1}) + |u_{k+1} - u_k|^2 / (2 tau) <= E0(u_k).
inline double dissipation_excess(const WeightedSpace& H, const Trajectory& tr, double tau) {
  double worst = -kInfinity;
  for (std::size_t k = 0; k + 1 < tr.energies.size(); ++k) {
    const Vector d = tr.states[k + 1] - tr.states[k];
    worst = std::max(worst, tr.energies[k + 1] + 0.5 / tau * inner(H, d, d) - tr.energies[k]);
  }
  return tr.energies.size() < 2 ? 0.0 : worst;
}

}  // namespace jflow
