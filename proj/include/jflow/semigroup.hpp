#pragma once

// Resolvents of the j-subgradient and the implicit Euler semigroup.

#include "jflow/jpair.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace jflow {

struct ResolventResult {
  Vector u;
  Vector u_hat;
  Vector f;
  double residual = 0.0;
  int iterations = 0;
};

struct ResolventOptions {
  double tol = default_tolerances().resolvent;
  std::optional<Vector> start;
  bool verify = false;
  int max_iter = 200000;
};

namespace detail {

/// Adds (1/2 lambda) ||j x - g||_H^2 to the objective.
inline void add_fidelity(Objective& obj, const JEllipticPair& pair, double lambda, const Vector& g) {
  const Index n = pair.v_dim();
  const Vector& w = pair.H.weights();
  if (pair.j.is_selection()) {
    DiagonalQuadratic q{Vector::Zero(n), Vector::Zero(n)};
    const auto& sel = pair.j.selection();
    for (std::size_t k = 0; k < sel.size(); ++k) {
      q.weight[sel[k]] = w[static_cast<Index>(k)] / lambda;
      q.anchor[sel[k]] = g[static_cast<Index>(k)];
    }
    obj.quadratic = std::move(q);
    return;
  }
  if (obj.has_coupling())
    throw Error("resolvent: l1-type energies are only supported with coordinate-restriction j");
  SmoothFunction base = obj.smooth;
  const JMap j = pair.j;
  obj.smooth = [base, j, w, g, lambda](const Vector& x, Vector* grad) {
    double v = 0.0;
    if (base) v = base(x, grad);
    else if (grad) grad->setZero(x.size());
    const Vector r = j(x) - g;
    v += 0.5 / lambda * (w.array() * r.array().square()).sum();
    if (grad) *grad += j.apply_transpose(Vector((w.array() * r.array()).matrix() / lambda));
    return v;
  };
  SmoothHessian base_hessian = obj.hessian;
  const Matrix fidelity = j.matrix().transpose() * w.asDiagonal() * j.matrix() / lambda;
  obj.hessian = [base_hessian, fidelity](const Vector& x) {
    return base_hessian ? Matrix(base_hessian(x) + fidelity) : fidelity;
  };
}

}  // namespace detail

/// J_lambda g: minimizes E(x) + (1/2 lambda) ||j x - g||_H^2 and returns u = j x, f = (g - u) / lambda.
inline ResolventResult resolvent(const JEllipticPair& pair, double lambda, const Vector& g,
                                 const ResolventOptions& opt = {}) {
  require(lambda > 0.0, "resolvent: lambda must be positive");
  pair.H.check(g, "resolvent");
  if (pair.omega > 0.0 && lambda * pair.omega >= 1.0)
    throw Error("resolvent step too large: lambda = " + std::to_string(lambda) + " needs lambda < 1/omega = " +
                std::to_string(1.0 / pair.omega));

  Objective obj = detail::energy_objective(pair.E);
  detail::add_fidelity(obj, pair, lambda, g);
  SolveSpec spec;
  spec.objective = std::move(obj);
  spec.start = opt.start ? *opt.start : particular_preimage(pair.j, g);
  require(spec.start.size() == pair.v_dim(), "resolvent: start has wrong dimension");
  // Residuals are measured in coordinates; scale so that the H-error stays below tol.
  const double modulus = pair.H.weights().minCoeff() / lambda * (1.0 - lambda * pair.omega);
  spec.tol = opt.tol * std::min(1.0, modulus);
  spec.max_iter = opt.max_iter;
  const SolveResult r = minimize(spec);
  if (!r.converged)
    throw Error("resolvent: minimization did not converge (residual " + std::to_string(r.residual) + " after " +
                std::to_string(r.iterations) + " iterations, " + method_name(r.method) + ")");

  ResolventResult out;
  out.u_hat = r.x;
  out.u = pair.j(r.x);
  out.f = (g - out.u) / lambda;
  out.residual = r.residual;
  out.iterations = r.iterations;
  if (opt.verify) {
    SubgradientOptions so;
    so.extension = out.u_hat;
    so.directions = 50;
    so.check_derivative = false;
    const double v = subgradient_residual(pair, out.u, out.f, so).max_violation;
    if (v > 10.0 * opt.tol * (1.0 + std::abs(pair.E.value(out.u_hat))))
      throw Error("resolvent: result fails the subgradient check (violation " + std::to_string(v) + ")");
  }
  return out;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> extensions;
  std::vector<Vector> fluxes;  // f_k = (u_{k-1} - u_k) / tau; fluxes[0] is empty
  std::vector<double> energies;
  std::vector<double> step_residuals;

  std::size_t size() const { return states.size(); }
};

class EvolveError : public Error {
 public:
  EvolveError(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

struct EvolveOptions {
  bool project_initial = false;
  bool record_energies = true;
  double tol = default_tolerances().resolvent;
  double lifted_tol = default_tolerances().lifted;
  int max_iter = 200000;  // per resolvent step
};

/// Closest point (in H) of the affine set j(D(E)) to u.
inline Vector project_onto_image(const JEllipticPair& pair, const Vector& u) {
  const AffineDomain dom = pair.E.domain();
  if (dom.empty) throw Error("project_onto_image: E is not proper");
  const Vector base = pair.j(dom.point);
  const Matrix D = pair.j.matrix() * dom.directions;
  if (D.cols() == 0) return base;
  const Vector s = pair.H.weights().cwiseSqrt();
  const Matrix SD = s.asDiagonal() * D;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(SD);
  cod.setThreshold(1e-12);
  const Vector z = cod.solve(Vector(s.asDiagonal() * (u - base)));
  return base + D * z;
}

/// Implicit Euler chain u_{k+1} = J_tau(u_k) up to time T.
inline Trajectory evolve(const JEllipticPair& pair, const Vector& u0, double T, double tau,
                         const EvolveOptions& opt = {}) {
  require(tau > 0.0, "evolve: tau must be positive");
  require(T >= tau, "evolve: T must be >= tau");
  if (pair.omega > 0.0 && tau > 0.9 / pair.omega)
    throw Error("evolve: tau exceeds 0.9/omega for a semiconvex pair");
  pair.H.check(u0, "evolve");

  Vector start = u0;
  const Vector projected = project_onto_image(pair, u0);
  if ((projected - u0).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + u0.cwiseAbs().maxCoeff())) {
    if (!opt.project_initial) throw Error("evolve: initial datum lies outside j(D(E))");
    start = projected;
  }

  const int steps = static_cast<int>(std::ceil(T / tau - 1e-9));
  Trajectory tr;
  tr.times.push_back(0.0);
  tr.states.push_back(start);
  tr.fluxes.emplace_back();
  tr.step_residuals.push_back(0.0);
  std::optional<Vector> warm;
  if (opt.record_energies) {
    const LiftedValue lv = lifted_value(pair, start, opt.lifted_tol);
    tr.energies.push_back(lv.value);
    tr.extensions.push_back(lv.minimizer);
    if (lv.minimizer.size()) warm = lv.minimizer;
  } else {
    tr.extensions.emplace_back();
  }

  for (int k = 0; k < steps; ++k) {
    ResolventResult r;
    try {
      ResolventOptions ro;
      ro.tol = opt.tol;
      ro.start = warm;
      ro.max_iter = opt.max_iter;
      r = resolvent(pair, tau, tr.states.back(), ro);
    } catch (const Error& e) {
      throw EvolveError("evolve: step " + std::to_string(k + 1) + " failed: " + e.what(), tr);
    }
    tr.times.push_back((k + 1) * tau);
    tr.states.push_back(r.u);
    tr.extensions.push_back(r.u_hat);
    tr.fluxes.push_back(r.f);
    tr.step_residuals.push_back(r.residual);
    if (opt.record_energies) tr.energies.push_back(lifted_value(pair, r.u, opt.lifted_tol, r.u_hat).value);
    warm = r.u_hat;
  }
  return tr;
}

/// ||S(t_k) u0 - S(t_k) v0||_H along both implicit Euler chains.
inline std::vector<double> semigroup_distance(const JEllipticPair& pair, const Vector& u0, const Vector& v0, double T,
                                              double tau, const EvolveOptions& opt = {}) {
  EvolveOptions o = opt;
  o.record_energies = false;
  const Trajectory a = evolve(pair, u0, T, tau, o);
  const Trajectory b = evolve(pair, v0, T, tau, o);
  std::vector<double> d;
  for (std::size_t k = 0; k < a.size(); ++k) d.push_back(norm(pair.H, Vector(a.states[k] - b.states[k])));
  return d;
}

}  // namespace jflow
