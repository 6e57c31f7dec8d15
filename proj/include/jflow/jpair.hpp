#pragma once

// The pair (E, j): lifted functional, elliptic extensions, j-subgradient residuals,
// chain functionals and graph reduction of partially defined j.

#include "jflow/functional.hpp"
#include "jflow/solver.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace jflow {

/// (E, j, H) with the shift omega making E_omega convex.
struct JEllipticPair {
  ExtendedFunctional E;
  JMap j;
  WeightedSpace H;
  double omega = 0.0;
  std::string name;

  JEllipticPair() = default;
  JEllipticPair(ExtendedFunctional energy, JMap map, WeightedSpace space, double shift, std::string label = {})
      : E(std::move(energy)), j(std::move(map)), H(std::move(space)), omega(shift), name(std::move(label)) {
    require(j.cols() == E.dim(), "JEllipticPair: j does not act on the space of E");
    require(j.rows() == H.dim(), "JEllipticPair: j does not map into H");
    require(omega >= 0.0, "JEllipticPair: omega must be >= 0");
    require(j.everywhere_defined(), "JEllipticPair: j has a restricted domain; apply graph_reduce first");
  }

  Index v_dim() const { return E.dim(); }
  Index h_dim() const { return H.dim(); }
  bool convex() const { return omega == 0.0; }
};

/// Shift used on top of omega when probing coercivity (any larger shift keeps convexity).
inline constexpr double kEllipticityMargin = 1.0;

struct PairValidation {
  ConvexityReport convexity;
  CoercivityReport coercivity;
  bool convex = false;
  bool elliptic = false;
};

/// Sampled certification of j-semiconvexity at omega and j-ellipticity at omega + margin.
inline PairValidation validate_pair(const JEllipticPair& pair, std::uint64_t seed = 0, int trials = 200) {
  const AffineDomain dom = pair.E.domain();
  require(!dom.empty, "validate_pair: E is not proper (empty effective domain)");
  PairValidation v;
  SamplingOptions s;
  s.trials = trials;
  s.seed = seed;
  s.center = dom.point;
  s.directions = dom.directions;
  v.convexity = sample_convexity(
      [&](const Vector& x) { return shifted_value(pair.E, pair.j, pair.H, pair.omega, x); }, pair.v_dim(), s);
  const double scale = 1.0 + std::abs(shifted_value(pair.E, pair.j, pair.H, pair.omega, dom.point));
  v.convex = v.convexity.max_violation <= 1e-8 * scale;
  CoercivityOptions c;
  c.seed = seed;
  c.start = dom.point;
  c.directions = dom.directions;
  c.trials = 32;
  const double base = shifted_value(pair.E, pair.j, pair.H, pair.omega + kEllipticityMargin, dom.point);
  v.coercivity = sample_coercivity([&](const Vector& x) { return pair.E.value(x); }, pair.omega + kEllipticityMargin,
                                   pair.j, pair.H, {base + 1.0, base + 100.0}, c);
  v.elliptic = v.coercivity.bounded;
  return v;
}

/// Particular least-squares preimage plus an orthonormal kernel basis of j.
struct FiberParametrization {
  Vector particular;
  Matrix kernel;
  double range_defect = 0.0;

  bool in_range(const Vector& u) const { return range_defect <= 1e-9 * (1.0 + u.cwiseAbs().maxCoeff()); }
};

inline FiberParametrization fiber(const JMap& j, const Vector& u) {
  FiberParametrization f;
  f.particular = particular_preimage(j, u);
  f.kernel = kernel_basis(j);
  f.range_defect = j.rows() ? (j(f.particular) - u).cwiseAbs().maxCoeff() : 0.0;
  return f;
}

namespace detail {

/// Objective carrying the energy E (smooth terms, l1 couplings, indicator constraints).
inline Objective energy_objective(const ExtendedFunctional& E) {
  Objective obj;
  obj.dim = E.dim();
  bool any_smooth = false;
  for (const auto& t : E.terms()) any_smooth = any_smooth || t.smooth();
  if (any_smooth) {
    auto energy = std::make_shared<const ExtendedFunctional>(E);
    obj.smooth = [energy](const Vector& x, Vector* g) { return energy->smooth_value(x, g); };
    obj.hessian = [energy](const Vector& x) { return energy->smooth_hessian(x); };
  }
  if (E.has_l1_coupling()) std::tie(obj.coupling, obj.coupling_weights) = E.l1_coupling();
  auto [A, b] = E.constraints();
  if (A.rows() > 0) obj.constraint = AffineConstraint(A, b);
  return obj;
}

inline AffineConstraint stacked_constraint(const ExtendedFunctional& E, const JMap& j, const Vector& u) {
  auto [A, b] = E.constraints();
  Matrix As(j.rows() + A.rows(), E.dim());
  As << j.matrix(), A;
  Vector bs(u.size() + b.size());
  bs << u, b;
  return AffineConstraint(As, bs);
}

}  // namespace detail

struct LiftedValue {
  double value = kInfinity;
  Vector minimizer;
  double residual = 0.0;
  int iterations = 0;
};

/// E0(u) = inf{E(x) : j x = u} together with one minimizer.
inline LiftedValue lifted_value(const JEllipticPair& pair, const Vector& u, double tol = default_tolerances().lifted,
                                const std::optional<Vector>& start = std::nullopt) {
  pair.H.check(u, "lifted_value");
  LiftedValue out;
  const FiberParametrization fib = fiber(pair.j, u);
  if (!fib.in_range(u)) return out;
  const AffineConstraint constraint = detail::stacked_constraint(pair.E, pair.j, u);
  if (!constraint.feasible()) return out;
  if (fib.kernel.cols() == 0) {
    out.minimizer = fib.particular;
    out.value = pair.E.value(fib.particular);
    return out;
  }
  Objective obj = detail::energy_objective(pair.E);
  obj.constraint = constraint;
  SolveSpec spec;
  spec.objective = std::move(obj);
  spec.start = start ? *start : fib.particular;
  require(spec.start.size() == pair.v_dim(), "lifted_value: start has wrong dimension");
  spec.tol = tol;
  const SolveResult r = minimize(spec);
  if (!r.converged)
    throw Error("lifted_value: fiber minimization did not converge (residual " + std::to_string(r.residual) +
                " after " + std::to_string(r.iterations) + " iterations, " + method_name(r.method) + ")");
  out.minimizer = r.x;
  out.value = pair.E.value(r.x);
  out.residual = r.residual;
  out.iterations = r.iterations;
  return out;
}

/// A minimizer of E over the fiber {j x = u}.
inline Vector elliptic_extension(const JEllipticPair& pair, const Vector& u, double tol = default_tolerances().resolvent,
                                 const std::optional<Vector>& start = std::nullopt) {
  LiftedValue lv = lifted_value(pair, u, tol, start);
  if (!std::isfinite(lv.value)) throw Error("elliptic_extension: the fiber over u does not meet D(E)");
  return lv.minimizer;
}

struct SubgradientResidual {
  double max_violation = -kInfinity;
  double derivative_mismatch = std::numeric_limits<double>::quiet_NaN();
  Vector extension;
  Vector witness_direction;
};

struct SubgradientOptions {
  int directions = 200;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  std::optional<Vector> extension;
  bool check_derivative = true;
};

/// Sampled violation of  E_w(x + v) - E_w(x) >= <f + w j x, j v>_H  at an elliptic extension x of u.
/// For smooth E the equality E'(x) v = <f, j v>_H is also probed by central differences.
inline SubgradientResidual subgradient_residual(const JEllipticPair& pair, const Vector& u, const Vector& f,
                                                const SubgradientOptions& opt = {}) {
  pair.H.check(u, "subgradient_residual");
  pair.H.check(f, "subgradient_residual");
  SubgradientResidual out;
  out.extension = opt.extension ? *opt.extension : elliptic_extension(pair, u, opt.tol);
  const Vector& x = out.extension;
  const AffineDomain dom = pair.E.domain();
  const Matrix kernel = kernel_basis(pair.j);
  const Index n = pair.v_dim();

  std::vector<Vector> dirs;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < opt.directions; ++k) {
    Vector z(dom.directions.cols());
    for (Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    Vector d = dom.directions * z;
    if (d.norm() > 0) dirs.push_back(d / d.norm());
  }
  // Kernel and coordinate directions, restricted to the directions of D(E).
  const Matrix P = dom.directions * dom.directions.transpose();
  for (Index c = 0; c < kernel.cols(); ++c) dirs.push_back(P * kernel.col(c));
  for (Index i = 0; i < n; ++i) dirs.push_back(P.col(i));

  const Vector jx = pair.j(x);
  const double base = shifted_value(pair.E, pair.j, pair.H, pair.omega, x);
  require(std::isfinite(base), "subgradient_residual: extension lies outside D(E)");
  const Vector slope = f + pair.omega * jx;
  for (const Vector& d0 : dirs) {
    if (d0.norm() == 0.0) continue;
    for (double sign : {1.0, -1.0}) {
      for (double scale : {1.0, 1e-1, 1e-2}) {
        const Vector v = sign * scale * d0;
        const double gain = shifted_value(pair.E, pair.j, pair.H, pair.omega, Vector(x + v)) - base;
        const double viol = inner(pair.H, slope, pair.j(v)) - gain;
        if (viol > out.max_violation) {
          out.max_violation = viol;
          out.witness_direction = v;
        }
      }
    }
  }

  if (opt.check_derivative && pair.E.all_smooth()) {
    double worst = 0.0;
    for (const Vector& d0 : dirs) {
      if (d0.norm() == 0.0) continue;
      const Vector d = d0 / d0.norm();
      const double h = 1e-5 * (1.0 + x.cwiseAbs().maxCoeff());
      const double fd = (pair.E.value(Vector(x + h * d)) - pair.E.value(Vector(x - h * d))) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - inner(pair.H, f, pair.j(d))));
    }
    out.derivative_mismatch = worst;
  }
  return out;
}

/// An element (u, f) of the j-subgradient.
struct SubgradientPair {
  Vector u;
  Vector f;
};

struct ChainOptions {
  double lifted_tol = 1e-10;
  bool verify = false;
  double verify_tol = 1e-6;
  std::uint64_t seed = 0;
};

namespace detail {
inline void verify_pair(const JEllipticPair& pair, const SubgradientPair& p, const ChainOptions& opt) {
  if (!opt.verify) return;
  SubgradientOptions so;
  so.seed = opt.seed;
  so.directions = 50;
  so.check_derivative = false;
  const double r = subgradient_residual(pair, p.u, p.f, so).max_violation;
  if (r > opt.verify_tol)
    throw Error("chain value: supplied pair is not in the j-subgradient (residual " + std::to_string(r) + ")");
}
}  // namespace detail

/// E3(u) = max over supplied (v, f) of <f, u - v>_H + E0(v).
inline double chain_value_E3(const JEllipticPair& pair, const Vector& u, const std::vector<SubgradientPair>& pairs,
                             const ChainOptions& opt = {}) {
  require(!pairs.empty(), "chain_value_E3: empty pair list");
  double best = -kInfinity;
  for (const auto& p : pairs) {
    detail::verify_pair(pair, p, opt);
    const double e0 = lifted_value(pair, p.u, opt.lifted_tol).value;
    best = std::max(best, inner(pair.H, p.f, Vector(u - p.u)) + e0);
  }
  return best;
}

/// E2(u): max over chains (u0, f0) -> (u1, f1) -> ... -> u of sum_i <f_i, u_{i+1} - u_i>_H + E0(u0).
/// Each chain lists the intermediate pairs (u1, f1), ..., (u_{n-1}, f_{n-1}); an empty chain is allowed.
inline double chain_value_E2(const JEllipticPair& pair, const Vector& u, const SubgradientPair& base,
                             const std::vector<std::vector<SubgradientPair>>& chains, const ChainOptions& opt = {}) {
  require(!chains.empty(), "chain_value_E2: empty chain set");
  detail::verify_pair(pair, base, opt);
  const double e0 = lifted_value(pair, base.u, opt.lifted_tol).value;
  double best = -kInfinity;
  for (const auto& chain : chains) {
    double s = e0;
    const SubgradientPair* prev = &base;
    for (const auto& link : chain) {
      detail::verify_pair(pair, link, opt);
      s += inner(pair.H, prev->f, Vector(link.u - prev->u));
      prev = &link;
    }
    s += inner(pair.H, prev->f, Vector(u - prev->u));
    best = std::max(best, s);
  }
  return best;
}

inline EnergyTerm composed(const EnergyTerm& t, const Matrix& map) {
  const Matrix input = t.input() ? Matrix(*t.input() * map) : map;
  return EnergyTerm(t.kind(), input, t.label());
}

/// Replaces a partially defined j by the projection of its graph:
/// V' = {(c, y)} with y = j B c, E'(c, y) = E(B c), j'(c, y) = y.
inline JEllipticPair graph_reduce(const ExtendedFunctional& E, const JMap& j, const WeightedSpace& H, double omega,
                                  std::string name = {}) {
  require(j.rows() == H.dim() && j.cols() == E.dim(), "graph_reduce: j does not match E and H");
  const Index n = E.dim(), m = j.rows();
  const Matrix B = j.domain() ? *j.domain() : Matrix(Matrix::Identity(n, n));
  const Index d = B.cols();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(B);
  cod.setThreshold(1e-12);
  require(cod.rank() == d, "graph_reduce: domain basis is not linearly independent");

  Matrix embed = Matrix::Zero(n, d + m);
  embed.leftCols(d) = B;
  ExtendedFunctional reduced(d + m);
  for (const auto& t : E.terms()) reduced.add(composed(t, embed));
  Matrix link(m, d + m);
  link << j.matrix() * B, -Matrix::Identity(m, m);
  reduced.add(EnergyTerm(AffineIndicator{link, Vector::Zero(m)}, "graph"));
  if (reduced.domain().empty)
    throw Error("graph_reduce: improper pair, D(E) does not meet D(j)");

  std::vector<Index> h_coords(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) h_coords[static_cast<std::size_t>(k)] = d + k;
  return JEllipticPair(std::move(reduced), JMap::restriction(d + m, h_coords), H, omega, std::move(name));
}

}  // namespace jflow
