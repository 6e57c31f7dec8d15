#pragma once

// Executable checks of invariance, comparison, domination and contractivity. Every check runs a
// functional-level test on the lifted energy and a semigroup-level test on implicit Euler
// trajectories; the two verdicts are reported separately together with an agreement flag.

#include "jflow/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace jflow {

struct PropertyReport {
  std::string name;
  bool passed = true;
  double max_violation = -kInfinity;
  double tolerance = 0.0;
  std::vector<double> witness;
  std::string witness_label;
  int trials = 0;
  int skipped = 0;
  bool agreement = true;  // functional and dynamic verdicts coincide
  std::vector<PropertyReport> parts;
  std::vector<std::string> notes;

  void finalize() { passed = max_violation <= tolerance; }
  const PropertyReport* part(const std::string& n) const {
    for (const auto& p : parts)
      if (p.name == n) return &p;
    return nullptr;
  }
};

struct CheckOptions {
  int samples = 50;       // functional-level draws
  int trajectories = 20;  // semigroup-level initial data
  std::uint64_t seed = 0;
  double T = 1.0;
  double tau = 0.05;
  double functional_tol = 1e-8;
  double dynamic_tol = 1e-6;
  double lifted_tol = 1e-9;
  double resolvent_tol = 1e-10;
  double sample_scale = 1.0;
  std::vector<double> resolvent_lambdas = {0.05, 0.5};
};

/// Default test family of N-functions: powers, thresholds and a Huber function.
inline std::vector<NFunction> default_psi_family() {
  return {NFunction::power(1.0),     NFunction::power(1.5),     NFunction::power(2.0), NFunction::power(4.0),
          NFunction::threshold(0.1), NFunction::threshold(1.0), NFunction::huber(0.5)};
}

/// j-images of Gaussian points of D(E). Draws alternate between rough ones and nearly flat ones
/// (small fluctuations around a random common level), since low-energy inputs are where most
/// lattice inequalities are tight.
class ImageSampler {
 public:
  ImageSampler(const JEllipticPair& pair, std::uint64_t seed, double scale = 1.0)
      : pair_(&pair), dom_(pair.E.domain()), rng_(seed), scale_(scale) {
    require(!dom_.empty, "ImageSampler: E is not proper");
    const Matrix& D = dom_.directions;
    level_ = D * (D.transpose() * Vector::Ones(D.rows()));
  }

  Vector next() {
    const bool flat = (count_++ % 2) == 1;
    Vector z(dom_.directions.cols());
    for (Index i = 0; i < z.size(); ++i) z[i] = (flat ? 0.05 : 1.0) * scale_ * normal_(rng_);
    Vector x = dom_.point + dom_.directions * z;
    if (flat) x += scale_ * normal_(rng_) * level_;
    return pair_->j(x);
  }

 private:
  const JEllipticPair* pair_;
  AffineDomain dom_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  double scale_;
  Vector level_;
  long count_ = 0;
};

namespace detail {

struct Tracker {
  PropertyReport report;

  Tracker(std::string name, double tol) {
    report.name = std::move(name);
    report.tolerance = tol;
  }

  void observe(double violation, std::initializer_list<Vector> inputs, const std::string& label = {}) {
    ++report.trials;
    if (!(violation > report.max_violation) && report.trials > 1) return;
    report.max_violation = violation;
    report.witness.clear();
    for (const Vector& v : inputs) report.witness.insert(report.witness.end(), v.data(), v.data() + v.size());
    report.witness_label = label;
  }
  void skip() { ++report.skipped; }

  PropertyReport done() {
    if (report.trials == 0) report.max_violation = 0.0;
    report.finalize();
    return report;
  }
};

inline double lifted(const JEllipticPair& pair, const Vector& u, const CheckOptions& opt) {
  return lifted_value(pair, u, opt.lifted_tol).value;
}

inline Trajectory orbit(const JEllipticPair& pair, const Vector& u0, const CheckOptions& opt) {
  EvolveOptions eo;
  eo.record_energies = false;
  eo.tol = opt.resolvent_tol;
  return evolve(pair, u0, opt.T, opt.tau, eo);
}

/// Combines sub-checks: passed iff every part passes; max_violation is the worst excess over
/// the part tolerances (so the combined tolerance is 0).
inline PropertyReport combine(std::string name, std::vector<PropertyReport> parts,
                              const std::vector<std::string>& compared = {}) {
  PropertyReport r;
  r.name = std::move(name);
  r.tolerance = 0.0;
  r.max_violation = -kInfinity;
  for (const auto& p : parts) {
    r.trials += p.trials;
    r.skipped += p.skipped;
    const double excess = p.max_violation - p.tolerance;
    if (excess > r.max_violation) {
      r.max_violation = excess;
      r.witness = p.witness;
      r.witness_label = p.name + (p.witness_label.empty() ? "" : ": " + p.witness_label);
    }
  }
  if (parts.empty()) r.max_violation = 0.0;
  std::vector<bool> verdicts;
  for (const auto& p : parts)
    if (compared.empty() || std::find(compared.begin(), compared.end(), p.name) != compared.end())
      verdicts.push_back(p.passed);
  r.agreement = std::adjacent_find(verdicts.begin(), verdicts.end(), std::not_equal_to<>()) == verdicts.end();
  r.parts = std::move(parts);
  r.finalize();
  if (!r.agreement) r.notes.push_back("functional-level and semigroup-level verdicts disagree");
  return r;
}

inline bool finite(double x) { return std::isfinite(x); }

}  // namespace detail

/// Invariance of a closed convex set C: E0(P_C u) <= E0(u), S(t) C in C and J_lambda C in C.
inline PropertyReport check_invariance(const JEllipticPair& pair, const ConvexSetOracle& C,
                                       const CheckOptions& opt = {}) {
  ImageSampler sampler(pair, opt.seed, opt.sample_scale);
  detail::Tracker functional("functional", opt.functional_tol);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u = sampler.next();
    const Vector pu = C.project(u);
    const double e = detail::lifted(pair, u, opt), ep = detail::lifted(pair, pu, opt);
    if (!detail::finite(e) || !detail::finite(ep)) {
      functional.skip();
      continue;
    }
    functional.observe(ep - e, {u}, "E0(P_C u) - E0(u)");
  }

  detail::Tracker dynamic("semigroup", opt.dynamic_tol);
  detail::Tracker resolvent_part("resolvent", opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = C.project(sampler.next());
    if (!detail::finite(detail::lifted(pair, u0, opt))) {
      dynamic.skip();
      continue;
    }
    const Trajectory tr = detail::orbit(pair, u0, opt);
    double worst = 0.0;
    for (const Vector& u : tr.states) worst = std::max(worst, C.distance_inf(u));
    dynamic.observe(worst, {u0}, "max distance of S(t)u0 from C");
    for (double lambda : opt.resolvent_lambdas) {
      if (pair.omega > 0.0 && lambda * pair.omega >= 1.0) continue;
      ResolventOptions ro;
      ro.tol = opt.resolvent_tol;
      resolvent_part.observe(C.distance_inf(resolvent(pair, lambda, u0, ro).u), {u0},
                             "distance of J_lambda u0 from C, lambda = " + std::to_string(lambda));
    }
  }
  return detail::combine("invariance(" + C.label() + ")",
                         {functional.done(), dynamic.done(), resolvent_part.done()});
}

/// Invariance of C2 relative to C1, assuming P_{C2} C1 in C1 (verified first by sampling).
inline PropertyReport check_relative_invariance(const JEllipticPair& pair, const ConvexSetOracle& C1,
                                                const ConvexSetOracle& C2, const CheckOptions& opt = {}) {
  ImageSampler sampler(pair, opt.seed, opt.sample_scale);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u = C1.project(sampler.next());
    if (!C1.contains(C2.project(u), 1e-10))
      throw PreconditionError("check_relative_invariance: precondition P_C2 C1 in C1 fails");
  }
  ImageSampler draws(pair, opt.seed + 1, opt.sample_scale);
  detail::Tracker functional("functional", opt.functional_tol);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u = C1.project(draws.next());
    const double e = detail::lifted(pair, u, opt), ep = detail::lifted(pair, C2.project(u), opt);
    if (!detail::finite(e) || !detail::finite(ep)) {
      functional.skip();
      continue;
    }
    functional.observe(ep - e, {u}, "E0(P_C2 u) - E0(u), u in C1");
  }
  detail::Tracker dynamic("semigroup", opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = C2.project(C1.project(draws.next()));
    if (!detail::finite(detail::lifted(pair, u0, opt))) {
      dynamic.skip();
      continue;
    }
    const Trajectory tr = detail::orbit(pair, u0, opt);
    double worst = 0.0;
    for (const Vector& u : tr.states) worst = std::max(worst, C2.distance_inf(u));
    dynamic.observe(worst, {u0}, "max distance of S(t)u0 from C2, u0 in C1 and C2");
  }
  return detail::combine("relative-invariance(" + C1.label() + ", " + C2.label() + ")",
                         {functional.done(), dynamic.done()});
}

/// Comparison S_A(t)u <= S_B(t)v for u <= v in C, and the lattice inequality
/// E0_A(u1 meet u2) + E0_B(u1 join u2) <= E0_A(u1) + E0_B(u2) on C x C.
inline PropertyReport check_comparison(const JEllipticPair& A, const JEllipticPair& B, const ConvexSetOracle& C,
                                       const CheckOptions& opt = {}, const std::string& name = "comparison") {
  require(A.h_dim() == B.h_dim() && A.H.weights() == B.H.weights(), "check_comparison: pairs live on different H");
  ImageSampler sa(A, opt.seed, opt.sample_scale), sb(B, opt.seed + 7, opt.sample_scale);
  for (int s = 0; s < std::min(opt.samples, 20); ++s) {
    const Vector u = C.project(sa.next()), v = C.project(sb.next());
    if (!C.contains(u.cwiseMin(v), 1e-10) || !C.contains(u.cwiseMax(v), 1e-10))
      throw PreconditionError("check_comparison: C is not closed under meet and join");
  }

  detail::Tracker functional("functional", opt.functional_tol);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u1 = C.project(sa.next()), u2 = C.project(sb.next());
    const double a1 = detail::lifted(A, u1, opt), b2 = detail::lifted(B, u2, opt);
    if (!detail::finite(a1) || !detail::finite(b2)) {
      functional.skip();
      continue;
    }
    const double lhs = detail::lifted(A, u1.cwiseMin(u2), opt) + detail::lifted(B, u1.cwiseMax(u2), opt);
    functional.observe(lhs - (a1 + b2), {u1, u2}, "E0_A(u1 meet u2) + E0_B(u1 join u2) - E0_A(u1) - E0_B(u2)");
  }

  detail::Tracker dynamic("semigroup", opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = C.project(sa.next());
    const Vector v0 = u0.cwiseMax(C.project(sb.next()));
    if (!detail::finite(detail::lifted(A, u0, opt)) || !detail::finite(detail::lifted(B, v0, opt))) {
      dynamic.skip();
      continue;
    }
    const Trajectory ta = detail::orbit(A, u0, opt), tb = detail::orbit(B, v0, opt);
    double worst = -kInfinity;
    for (std::size_t k = 0; k < ta.size(); ++k)
      worst = std::max(worst, (ta.states[k] - tb.states[k]).maxCoeff());
    dynamic.observe(worst, {u0, v0}, "max_k max_i (S_A u0 - S_B v0)_i, u0 <= v0");
  }
  return detail::combine(name + "(" + C.label() + ")", {functional.done(), dynamic.done()});
}

inline PropertyReport check_order_preserving(const JEllipticPair& pair, const ConvexSetOracle& C,
                                             const CheckOptions& opt = {}) {
  return check_comparison(pair, pair, C, opt, "order-preserving");
}

namespace detail {
inline Vector sign_of(const Vector& u) {
  Vector s(u.size());
  for (Index i = 0; i < u.size(); ++i) s[i] = (u[i] > 0) - (u[i] < 0);
  return s;
}
}  // namespace detail

/// Domination |S_A(t)u| <= S_B(t)|u| with S_B positive and order preserving.
inline PropertyReport check_domination(const JEllipticPair& A, const JEllipticPair& B, const CheckOptions& opt = {}) {
  require(A.h_dim() == B.h_dim() && A.H.weights() == B.H.weights(), "check_domination: pairs live on different H");
  const ConvexSetOracle cone = ConvexSetOracle::positive_cone();
  CheckOptions pre = opt;
  pre.samples = std::max(5, opt.samples / 5);
  pre.trajectories = std::max(2, opt.trajectories / 5);
  const PropertyReport positive = check_invariance(B, cone, pre);
  const PropertyReport ordered = check_order_preserving(B, cone, pre);
  if (!positive.passed || !ordered.passed)
    throw PreconditionError("check_domination: dominating semigroup is not positive and order preserving");

  ImageSampler sa(A, opt.seed, opt.sample_scale), sb(B, opt.seed + 11, opt.sample_scale);
  detail::Tracker functional("functional", opt.functional_tol);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u1 = sa.next(), u2 = sb.next().cwiseAbs();
    const double a1 = detail::lifted(A, u1, opt), b2 = detail::lifted(B, u2, opt);
    if (!detail::finite(a1) || !detail::finite(b2)) {
      functional.skip();
      continue;
    }
    const Vector abs1 = u1.cwiseAbs();
    const Vector w1 = abs1.cwiseMin(u2).cwiseProduct(detail::sign_of(u1));
    const double lhs = detail::lifted(A, w1, opt) + detail::lifted(B, abs1.cwiseMax(u2), opt);
    functional.observe(lhs - (a1 + b2), {u1, u2},
                       "E0_A((|u1| meet u2) sign u1) + E0_B(|u1| join u2) - E0_A(u1) - E0_B(u2)");
  }

  detail::Tracker dynamic("semigroup", opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = sa.next();
    if (!detail::finite(detail::lifted(B, Vector(u0.cwiseAbs()), opt))) {
      dynamic.skip();
      continue;
    }
    const Trajectory ta = detail::orbit(A, u0, opt), tb = detail::orbit(B, u0.cwiseAbs(), opt);
    double worst = -kInfinity;
    for (std::size_t k = 0; k < ta.size(); ++k)
      worst = std::max(worst, (ta.states[k].cwiseAbs() - tb.states[k]).maxCoeff());
    dynamic.observe(worst, {u0}, "max_k max_i (|S_A u0| - S_B |u0|)_i");
  }
  return detail::combine("domination", {functional.done(), dynamic.done()});
}

/// L-infinity contractivity: truncation inequality for the lifted energy and sup-norm contraction.
inline PropertyReport check_linf_contractivity(const JEllipticPair& pair, const CheckOptions& opt = {},
                                               std::vector<double> alpha_fractions = {0.1, 0.5, 0.9, 1.5}) {
  ImageSampler sampler(pair, opt.seed, opt.sample_scale);
  detail::Tracker functional("functional", opt.functional_tol);
  for (int s = 0; s < opt.samples; ++s) {
    const Vector u1 = sampler.next(), u2 = sampler.next();
    const double e1 = detail::lifted(pair, u1, opt), e2 = detail::lifted(pair, u2, opt);
    if (!detail::finite(e1) || !detail::finite(e2)) {
      functional.skip();
      continue;
    }
    const double gap = (u1 - u2).cwiseAbs().maxCoeff();
    const double alpha = alpha_fractions[static_cast<std::size_t>(s) % alpha_fractions.size()] * gap;
    const Vector lo = ((u1 + u2).array() - alpha).matrix() / 2.0;
    const Vector hi = ((u1 + u2).array() + alpha).matrix() / 2.0;
    const Vector w1 = u1.cwiseMax(lo).cwiseMin(hi);
    const Vector w2 = u2.cwiseMin(hi).cwiseMax(lo);
    const double lhs = detail::lifted(pair, w1, opt) + detail::lifted(pair, w2, opt);
    Vector a(1);
    a[0] = alpha;
    functional.observe(lhs - (e1 + e2), {u1, u2, a}, "truncated pair energy minus E0(u1) + E0(u2); last entry alpha");
  }

  detail::Tracker dynamic("semigroup", opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = sampler.next(), v0 = sampler.next();
    const Trajectory a = detail::orbit(pair, u0, opt), b = detail::orbit(pair, v0, opt);
    const double base = (u0 - v0).cwiseAbs().maxCoeff();
    double worst = -kInfinity;
    for (std::size_t k = 0; k < a.size(); ++k)
      worst = std::max(worst, (a.states[k] - b.states[k]).cwiseAbs().maxCoeff() - base);
    dynamic.observe(worst, {u0, v0}, "max_k ||S u0 - S v0||_inf - ||u0 - v0||_inf");
  }
  return detail::combine("linf-contractivity", {functional.done(), dynamic.done()});
}

namespace detail {
/// Largest step-to-step increase of int psi(S(t)u - S(t)v) over the given trajectories.
inline double psi_growth(const WeightedSpace& H, const NFunction& psi, const Trajectory& a, const Trajectory& b) {
  double worst = -kInfinity;
  double prev = modular(H, Vector(a.states[0] - b.states[0]), psi);
  for (std::size_t k = 1; k < a.size(); ++k) {
    const double cur = modular(H, Vector(a.states[k] - b.states[k]), psi);
    worst = std::max(worst, cur - prev);
    prev = cur;
  }
  return worst;
}
}  // namespace detail

/// int psi(S(t)u1 - S(t)u2) dmu is nonincreasing in t for every psi in the family.
inline PropertyReport check_complete_contractivity(const JEllipticPair& pair,
                                                   const std::vector<NFunction>& family = default_psi_family(),
                                                   const CheckOptions& opt = {}) {
  for (const auto& psi : family)
    require(is_admissible(psi, false), "check_complete_contractivity: " + psi.label + " is not in J0");
  ImageSampler sampler(pair, opt.seed, opt.sample_scale);
  std::vector<detail::Tracker> trackers;
  for (const auto& psi : family) trackers.emplace_back(psi.label, opt.dynamic_tol);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector u0 = sampler.next(), v0 = sampler.next();
    const Trajectory a = detail::orbit(pair, u0, opt), b = detail::orbit(pair, v0, opt);
    for (std::size_t q = 0; q < family.size(); ++q)
      trackers[q].observe(detail::psi_growth(pair.H, family[q], a, b), {u0, v0}, "largest step increase");
  }
  std::vector<PropertyReport> parts;
  for (auto& t : trackers) parts.push_back(t.done());
  return detail::combine("complete-contractivity", std::move(parts));
}

/// A scalar functional on H, e.g. an integral of an N-function or a norm.
using HFunctional = std::function<double(const Vector&)>;

inline HFunctional integral_of(const WeightedSpace& H, const NFunction& psi) {
  return [H, psi](const Vector& u) { return modular(H, u, psi); };
}

/// psi(u1 - u2 + lambda (v1 - v2)) >= psi(u1 - u2) over all listed pairs; no membership check.
inline PropertyReport check_psi_accretive_pairs(const HFunctional& psi, const std::vector<SubgradientPair>& pairs,
                                                const std::vector<double>& lambdas, double tol = 1e-8) {
  detail::Tracker t("psi-accretive", tol);
  for (std::size_t a = 0; a < pairs.size(); ++a)
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      if (a == b) continue;
      const Vector du = pairs[a].u - pairs[b].u, dv = pairs[a].f - pairs[b].f;
      const double base = psi(du);
      for (double lambda : lambdas) {
        Vector l(1);
        l[0] = lambda;
        t.observe(base - psi(Vector(du + lambda * dv)), {pairs[a].u, pairs[a].f, pairs[b].u, pairs[b].f, l},
                  "psi(u1 - u2) - psi(u1 - u2 + lambda (f1 - f2))");
      }
    }
  return t.done();
}

/// psi-accretivity of the j-subgradient on verified pairs, cross-checked against psi-contractivity of
/// the resolvents and of the semigroup (the two verdicts must coincide).
inline PropertyReport check_psi_accretive(const JEllipticPair& pair, const HFunctional& psi,
                                          const std::vector<SubgradientPair>& pairs, const std::vector<double>& lambdas,
                                          const CheckOptions& opt = {}, double verify_tol = 1e-6) {
  for (const auto& p : pairs) {
    SubgradientOptions so;
    so.seed = opt.seed;
    so.directions = 30;
    so.check_derivative = false;
    const double r = subgradient_residual(pair, p.u, p.f, so).max_violation;
    if (r > verify_tol)
      throw PreconditionError("check_psi_accretive: a supplied pair is not in the j-subgradient (residual " + std::to_string(r) +
                  ")");
  }
  PropertyReport accretive = check_psi_accretive_pairs(psi, pairs, lambdas, opt.functional_tol);
  accretive.name = "accretivity";

  // psi-contraction of J_lambda on pairs of data, and along trajectories.
  detail::Tracker contraction("contraction", opt.dynamic_tol);
  ImageSampler sampler(pair, opt.seed + 3, opt.sample_scale);
  for (int s = 0; s < opt.trajectories; ++s) {
    const Vector g1 = sampler.next(), g2 = sampler.next();
    const double base = psi(Vector(g1 - g2));
    for (double lambda : lambdas) {
      if (pair.omega > 0.0 && lambda * pair.omega >= 1.0) continue;
      ResolventOptions ro;
      ro.tol = opt.resolvent_tol;
      const Vector d = resolvent(pair, lambda, g1, ro).u - resolvent(pair, lambda, g2, ro).u;
      contraction.observe(psi(d) - base, {g1, g2}, "psi(J g1 - J g2) - psi(g1 - g2)");
    }
  }
  PropertyReport r = detail::combine("psi-accretive", {accretive, contraction.done()});
  r.notes.push_back(r.agreement ? "accretivity and contraction verdicts agree"
                                : "accretivity and contraction verdicts disagree");
  return r;
}

/// Order preservation together with L1- and L-infinity contractivity forces complete contractivity;
/// any other combination of verdicts points at a defect in the checkers themselves.
inline PropertyReport check_interpolation_consistency(const PropertyReport& order, const PropertyReport& l1,
                                                      const PropertyReport& linf, const PropertyReport& complete) {
  PropertyReport r;
  r.name = "interpolation-consistency";
  r.tolerance = 0.0;
  r.trials = 1;
  const bool premise = order.passed && l1.passed && linf.passed;
  r.max_violation = premise && !complete.passed ? 1.0 : 0.0;
  r.parts = {order, l1, linf, complete};
  r.finalize();
  r.agreement = r.passed;
  if (!r.passed) r.notes.push_back("order + L1 + Linf contractivity passed but complete contractivity failed");
  return r;
}

inline PropertyReport check_l1_contractivity(const JEllipticPair& pair, const CheckOptions& opt = {}) {
  PropertyReport r = check_complete_contractivity(pair, {NFunction::power(1.0)}, opt);
  r.name = "l1-contractivity";
  return r;
}

inline PropertyReport check_interpolation_consistency(const JEllipticPair& pair, const CheckOptions& opt = {}) {
  const ConvexSetOracle H = ConvexSetOracle::whole_space();
  return check_interpolation_consistency(check_order_preserving(pair, H, opt), check_l1_contractivity(pair, opt),
                                         check_linf_contractivity(pair, opt),
                                         check_complete_contractivity(pair, default_psi_family(), opt));
}

}  // namespace jflow
