#pragma once

// First-order convex minimization engine behind every fiber and resolvent computation.
//
// Objectives are composites
//     f(x) + (1/2) sum_i c_i (x_i - a_i)^2 + sum_i s_i |x_i| + sum_r w_r |(K x)_r| + indicator{A x = b}
// with f smooth. The residual contract: for smooth + prox composites the residual is the norm
// of the prox-gradient mapping at the returned point; for the primal-dual method it is the
// largest of the primal residual, dual residual and (when it is computable) the duality gap.

#include "jflow/functional.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace jflow {

/// (1/2) sum_i weight_i (x_i - anchor_i)^2 with weight_i >= 0.
struct DiagonalQuadratic {
  Vector weight;
  Vector anchor;

  double value(const Vector& x) const {
    return 0.5 * (weight.array() * (x - anchor).array().square()).sum();
  }
};

/// {x : A x = b} with an exact Euclidean projection. Coordinate-fixing constraints are
/// recognised and kept separable.
class AffineConstraint {
 public:
  AffineConstraint() = default;

  AffineConstraint(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
    require(A_.rows() == b_.size(), "AffineConstraint: shape mismatch");
    const JMap rows(A_);
    if (rows.is_selection() && A_.rows() > 0) {
      fixed_ = rows.selection();
      values_ = b_;
      return;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A_);
    cod.setThreshold(1e-12);
    pinv_ = cod.pseudoInverse();
    const Vector p = pinv_ * b_;
    feasible_ = (A_ * p - b_).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + b_.cwiseAbs().maxCoeff());
  }

  static AffineConstraint fix(Index dim, const std::vector<Index>& nodes, const Vector& values) {
    return AffineConstraint(JMap::restriction(dim, nodes).matrix(), values);
  }

  bool feasible() const { return feasible_; }
  bool coordinate_fixing() const { return !fixed_.empty(); }
  const std::vector<Index>& fixed() const { return fixed_; }
  const Vector& fixed_values() const { return values_; }
  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }

  Vector project(const Vector& x) const {
    if (coordinate_fixing()) {
      Vector y = x;
      for (std::size_t k = 0; k < fixed_.size(); ++k) y[fixed_[k]] = values_[static_cast<Index>(k)];
      return y;
    }
    if (A_.rows() == 0) return x;
    return x - pinv_ * (A_ * x - b_);
  }

  double violation(const Vector& x) const {
    if (A_.rows() == 0) return 0.0;
    return (A_ * x - b_).cwiseAbs().maxCoeff();
  }

 private:
  Matrix A_;
  Vector b_;
  Matrix pinv_;
  std::vector<Index> fixed_;
  Vector values_;
  bool feasible_ = true;
};

/// Smooth part: returns f(x) and writes the gradient when `grad` is non-null.
using SmoothFunction = std::function<double(const Vector&, Vector*)>;
/// Optional Hessian of the smooth part (used only by the Newton finish).
using SmoothHessian = std::function<Matrix(const Vector&)>;

struct Objective {
  Index dim = 0;
  SmoothFunction smooth;
  SmoothHessian hessian;
  std::optional<DiagonalQuadratic> quadratic;
  Vector l1_weights;
  Matrix coupling;
  Vector coupling_weights;
  std::optional<AffineConstraint> constraint;

  bool has_coupling() const { return coupling.rows() > 0; }

  double value(const Vector& x) const {
    if (constraint && constraint->violation(x) > 1e-9) return kInfinity;
    double v = smooth ? smooth(x, nullptr) : 0.0;
    if (quadratic) v += quadratic->value(x);
    if (l1_weights.size()) v += (l1_weights.array() * x.array().abs()).sum();
    if (has_coupling()) v += (coupling_weights.array() * (coupling * x).array().abs()).sum();
    return v;
  }
};

enum class Method { automatic, proximal_gradient, accelerated, subgradient_averaging, primal_dual_tv };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::automatic: return "automatic";
    case Method::proximal_gradient: return "proximal-gradient-backtracking";
    case Method::accelerated: return "accelerated";
    case Method::subgradient_averaging: return "subgradient-averaging";
    case Method::primal_dual_tv: return "primal-dual-tv";
  }
  return "unknown";
}

struct SolveSpec {
  Objective objective;
  Vector start;
  double tol = 1e-8;
  int max_iter = 200000;
  Method method = Method::automatic;
};

struct SolveResult {
  Vector x;
  double residual = kInfinity;
  int iterations = 0;
  bool converged = false;
  Method method = Method::automatic;
  std::string diagnostics;
};

namespace detail {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/// Smooth part seen by the gradient methods: f plus the diagonal quadratic.
inline double smooth_total(const Objective& obj, const Vector& x, Vector* grad) {
  double v = 0.0;
  if (grad) grad->setZero(obj.dim);
  if (obj.smooth) {
    Vector g;
    v += obj.smooth(x, grad ? &g : nullptr);
    if (grad) *grad += g;
  }
  if (obj.quadratic) {
    v += obj.quadratic->value(x);
    if (grad) *grad += (obj.quadratic->weight.array() * (x - obj.quadratic->anchor).array()).matrix();
  }
  return v;
}

inline double nonsmooth_value(const Objective& obj, const Vector& x) {
  double v = 0.0;
  if (obj.l1_weights.size()) v += (obj.l1_weights.array() * x.array().abs()).sum();
  return v;
}

/// prox of step * (separable l1) + indicator of the constraint.
inline Vector prox(const Objective& obj, const Vector& z, double step) {
  Vector x = z;
  if (obj.l1_weights.size())
    for (Index i = 0; i < x.size(); ++i) x[i] = soft_threshold(x[i], step * obj.l1_weights[i]);
  if (obj.constraint) x = obj.constraint->project(x);
  return x;
}

struct GradientStep {
  Vector x;
  double lipschitz;
  double smooth_value;
};

/// One backtracked prox-gradient step from y. Accepts when either the descent lemma or the
/// equivalent gradient-monotonicity bound holds (the latter is robust to cancellation).
inline GradientStep backtracked_step(const Objective& obj, const Vector& y, double fy, const Vector& gy, double L) {
  Vector gx;
  for (int k = 0; k < 200; ++k) {
    const Vector x = prox(obj, y - gy / L, 1.0 / L);
    const Vector d = x - y;
    const double dd = d.squaredNorm();
    const double fx = smooth_total(obj, x, &gx);
    if (dd == 0.0) return {x, L, fx};
    const bool descent = fx <= fy + gy.dot(d) + 0.5 * L * dd;
    const bool monotone = (gx - gy).dot(d) <= 0.5 * L * dd;
    if (std::isfinite(fx) && (descent || monotone)) return {x, L, fx};
    L *= 2.0;
  }
  throw Error("minimize: backtracking failed (gradient not locally Lipschitz?)");
}

inline double mapping_residual(const Objective& obj, const Vector& x, double& L) {
  Vector g;
  const double f = smooth_total(obj, x, &g);
  const GradientStep s = backtracked_step(obj, x, f, g, L);
  L = s.lipschitz;
  return s.lipschitz * (s.x - x).norm();
}

inline void check_prox_structure(const Objective& obj) {
  if (obj.l1_weights.size() && obj.constraint && !obj.constraint->coordinate_fixing() &&
      obj.constraint->A().rows() > 0)
    throw Error("minimize: separable l1 together with a general affine constraint is not prox-friendly");
}

inline SolveResult subgradient_averaging(const SolveSpec& spec, Vector x, int used);

/// Damped Newton finish for smooth objectives whose gradient is far from Lipschitz near the
/// minimizer (p-edge energies with p < 2). Uses the declared Hessian when there is one and a
/// central difference of the gradient otherwise; the result is only used when it passes the same
/// residual test as the first-order methods.
inline bool newton_eligible(const Objective& obj) {
  return obj.l1_weights.size() == 0 && !obj.has_coupling() &&
         (!obj.constraint || obj.constraint->coordinate_fixing() || obj.constraint->A().rows() == 0);
}

/// Gradient change caused by moving single free coordinates by one rounding unit. When no
/// descent step is representable, a residual below a few of these is as good as doubles allow
/// (|d|^(p-1) with p < 2 changes by ~1e-8 under a 1e-16 shift of d near 0).
inline double rounding_floor(const Objective& obj, const Vector& x, const std::vector<Index>& free) {
  Vector g0, g1;
  smooth_total(obj, x, &g0);
  double worst = 0.0;
  for (Index k : free) {
    Vector y = x;
    y[k] = std::nextafter(y[k], kInfinity);
    smooth_total(obj, y, &g1);
    double s = 0.0;
    for (Index l : free) s += (g1[l] - g0[l]) * (g1[l] - g0[l]);
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

inline std::optional<Vector> newton_refine(const Objective& obj, Vector x, double tol, double& residual) {
  std::vector<bool> is_fixed(static_cast<std::size_t>(obj.dim), false);
  if (obj.constraint)
    for (Index i : obj.constraint->fixed()) is_fixed[static_cast<std::size_t>(i)] = true;
  std::vector<Index> free;
  for (Index i = 0; i < obj.dim; ++i)
    if (!is_fixed[static_cast<std::size_t>(i)]) free.push_back(i);
  const auto m = static_cast<Index>(free.size());
  if (m == 0) return std::nullopt;
  Vector g, gp, gm;
  for (int it = 0; it < 60; ++it) {
    double f = smooth_total(obj, x, &g);
    Vector gf(m);
    for (Index k = 0; k < m; ++k) gf[k] = g[free[static_cast<std::size_t>(k)]];
    double L = 1.0;
    residual = mapping_residual(obj, x, L);
    if (residual <= tol) return x;
    auto at = [&](Index k) { return free[static_cast<std::size_t>(k)]; };
    Matrix Hs(m, m);
    if (obj.hessian || !obj.smooth) {
      Matrix full = obj.smooth ? obj.hessian(x) : Matrix::Zero(obj.dim, obj.dim);
      if (obj.quadratic) full.diagonal() += obj.quadratic->weight;
      for (Index k = 0; k < m; ++k)
        for (Index l = 0; l < m; ++l) Hs(l, k) = full(at(l), at(k));
    } else {
      for (Index k = 0; k < m; ++k) {
        const double h = 1e-7 * (1.0 + std::abs(x[at(k)]));
        Vector xp = x, xm = x;
        xp[at(k)] += h;
        xm[at(k)] -= h;
        smooth_total(obj, xp, &gp);
        smooth_total(obj, xm, &gm);
        for (Index l = 0; l < m; ++l) Hs(l, k) = (gp[at(l)] - gm[at(l)]) / (2 * h);
      }
    }
    Hs = 0.5 * (Hs + Hs.transpose());
    const double scale = 1e-12 * (1.0 + Hs.diagonal().cwiseAbs().maxCoeff());
    Vector d;
    for (double mu = scale; mu < 1e12 * scale; mu *= 100.0) {
      Eigen::LLT<Matrix> llt(Hs + mu * Matrix::Identity(m, m));
      if (llt.info() == Eigen::Success) {
        d = -llt.solve(gf);
        break;
      }
    }
    if (d.size() == 0 || !d.allFinite() || gf.dot(d) >= 0.0) break;
    double step = 1.0;
    bool moved = false;
    // Near the minimizer f stops resolving progress; there a decrease of the free gradient with
    // f unchanged up to rounding is accepted instead (this also damps the Newton oscillation on
    // |d|^p, p < 2).
    const double gnorm = gf.norm(), f_noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      Vector y = x;
      for (Index l = 0; l < m; ++l) y[free[static_cast<std::size_t>(l)]] += step * d[l];
      const double fy = smooth_total(obj, y, &gp);
      double gy = 0.0;
      for (Index l = 0; l < m; ++l) gy += gp[at(l)] * gp[at(l)];
      const bool armijo = fy <= f + 1e-4 * step * gf.dot(d) && fy < f - f_noise;
      const bool flat = fy <= f + f_noise && std::sqrt(gy) <= (1.0 - 1e-4 * step) * gnorm;
      if (std::isfinite(fy) && (armijo || flat)) {
        x = std::move(y);
        moved = true;
        break;
      }
    }
    if (!moved || step < 1e-9) break;  // stalled
  }
  double L2 = 1.0;
  residual = mapping_residual(obj, x, L2);
  return residual <= std::max(tol, 4.0 * rounding_floor(obj, x, free)) ? std::optional<Vector>(x) : std::nullopt;
}



inline SolveResult gradient_method(const SolveSpec& spec, bool accelerate) {
  const Objective& obj = spec.objective;
  check_prox_structure(obj);
  Vector x = prox(obj, spec.start, 0.0);
  Vector y = x, gy;
  double L = 1.0, t = 1.0;
  double F_x = smooth_total(obj, x, nullptr) + nonsmooth_value(obj, x);
  SolveResult res;
  res.method = accelerate ? Method::accelerated : Method::proximal_gradient;
  for (int it = 1; it <= spec.max_iter; ++it) {
    const double fy = smooth_total(obj, y, &gy);
    GradientStep s = backtracked_step(obj, y, fy, gy, L);
    L = s.lipschitz;
    if (L > 1e18) return subgradient_averaging(spec, x, it);
    const double r = L * (s.x - y).norm();
    if (r <= spec.tol) {
      double Lx = L;
      const double rx = mapping_residual(obj, s.x, Lx);
      if (rx <= spec.tol) {
        res.x = s.x;
        res.residual = rx;
        res.iterations = it;
        res.converged = true;
        return res;
      }
    }
    const double F_new = s.smooth_value + nonsmooth_value(obj, s.x);
    if (accelerate) {
      // Adaptive restart on objective increase or a momentum direction pointing uphill.
      if (F_new > F_x || (y - s.x).dot(s.x - x) > 0.0) {
        t = 1.0;
        y = s.x;
      } else {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = s.x + ((t - 1.0) / t_next) * (s.x - x);
        t = t_next;
      }
    } else {
      y = s.x;
    }
    x = std::move(s.x);
    F_x = F_new;
    L *= 0.9;
    if ((it == 500 || it % 2000 == 0) && newton_eligible(obj)) {
      double rn = kInfinity;
      if (auto xn = newton_refine(obj, x, spec.tol, rn)) {
        res.x = *xn;
        res.residual = rn;
        res.iterations = it;
        res.converged = true;
        res.diagnostics = rn <= spec.tol ? "finished by damped Newton refinement"
                                         : "damped Newton stopped at the rounding floor";
        return res;
      }
    }
  }
  double Lx = L;
  res.x = x;
  res.residual = mapping_residual(obj, x, Lx);
  res.iterations = spec.max_iter;
  res.converged = res.residual <= spec.tol;
  res.diagnostics = "max_iter reached";
  return res;
}

inline SolveResult subgradient_averaging(const SolveSpec& spec, Vector x, int used) {
  const Objective& obj = spec.objective;
  x = prox(obj, x, 0.0);
  Vector avg = x, g;
  double weight_sum = 0.0;
  const double R = 1.0 + x.norm();
  SolveResult res;
  res.method = Method::subgradient_averaging;
  for (int it = used; it <= spec.max_iter; ++it) {
    smooth_total(obj, x, &g);
    if (obj.l1_weights.size())
      for (Index i = 0; i < x.size(); ++i) g[i] += obj.l1_weights[i] * ((x[i] > 0) - (x[i] < 0));
    if (obj.has_coupling()) {
      const Vector kx = obj.coupling * x;
      Vector s(kx.size());
      for (Index r = 0; r < kx.size(); ++r) s[r] = obj.coupling_weights[r] * ((kx[r] > 0) - (kx[r] < 0));
      g += obj.coupling.transpose() * s;
    }
    const double gn = g.norm();
    if (gn == 0.0) {
      avg = x;
      break;
    }
    const double step = R / (std::sqrt(static_cast<double>(it - used + 1)) * gn);
    x = prox(obj, x - step * g, step);
    weight_sum += step;
    avg += (step / weight_sum) * (x - avg);
  }
  double L = 1.0;
  res.x = avg;
  res.residual = obj.has_coupling() ? kInfinity : mapping_residual(obj, avg, L);
  res.iterations = spec.max_iter;
  res.converged = res.residual <= spec.tol;
  res.diagnostics = "subgradient averaging fallback";
  return res;
}

inline double operator_norm(const Matrix& K) {
  if (K.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(K.transpose() * K, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Exact finishing step for graph-structured couplings (every row is w|x_a - x_b| or w|x_a|).
/// Nodes joined by rows with |(Kx)_r| <= delta are merged; cluster values then follow from the
/// stationarity equations with the signs of the remaining rows frozen. The candidate is returned
/// only when a dual certificate (flows within [-w, w] balancing every free node) is found.
struct PolishInput {
  const Matrix& K;
  const Vector& w;
  const Vector& c;
  const Vector& a;
  const std::vector<bool>& fixed;
  const Vector& fixed_values;
};

inline std::optional<Vector> polish(const PolishInput& in, const Vector& x, double delta) {
  const Index n = x.size(), m = in.K.rows();
  const Index ground = n;
  std::vector<Index> parent(static_cast<std::size_t>(n + 1));
  for (Index i = 0; i <= n; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  };
  // Row structure: (node a, node b or ground, coefficient on a).
  std::vector<std::array<Index, 2>> ends(static_cast<std::size_t>(m));
  const Vector kx = in.K * x;
  std::vector<bool> internal(static_cast<std::size_t>(m), false);
  for (Index r = 0; r < m; ++r) {
    Index nz[3];
    int count = 0;
    for (Index i = 0; i < n && count < 3; ++i)
      if (in.K(r, i) != 0.0) nz[count++] = i;
    if (count == 1) {
      ends[static_cast<std::size_t>(r)] = {nz[0], ground};
    } else if (count == 2 && in.K(r, nz[0]) == -in.K(r, nz[1])) {
      ends[static_cast<std::size_t>(r)] = {nz[0], nz[1]};
    } else {
      return std::nullopt;
    }
    if (std::abs(kx[r]) <= delta) {
      internal[static_cast<std::size_t>(r)] = true;
      const auto [p, q] = ends[static_cast<std::size_t>(r)];
      parent[static_cast<std::size_t>(find(p))] = find(q);
    }
  }

  // Cluster sums.
  std::vector<double> csum(static_cast<std::size_t>(n + 1), 0.0), rhs(static_cast<std::size_t>(n + 1), 0.0),
      xsum(static_cast<std::size_t>(n + 1), 0.0), count(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<std::optional<double>> pinned(static_cast<std::size_t>(n + 1));
  pinned[static_cast<std::size_t>(find(ground))] = 0.0;
  Vector external = Vector::Zero(n);  // sum_r K_ri w_r sgn_r over non-internal rows
  for (Index r = 0; r < m; ++r) {
    if (internal[static_cast<std::size_t>(r)]) continue;
    const double s = in.w[r] * ((kx[r] > 0) - (kx[r] < 0));
    for (Index i : ends[static_cast<std::size_t>(r)])
      if (i != ground) external[i] += in.K(r, i) * s;
  }
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(find(i));
    if (in.fixed[static_cast<std::size_t>(i)]) {
      const double v = in.fixed_values[i];
      if (pinned[k] && std::abs(*pinned[k] - v) > 1e-14 * (1.0 + std::abs(v))) return std::nullopt;
      pinned[k] = v;
      continue;
    }
    csum[k] += in.c[i];
    rhs[k] += in.c[i] * in.a[i] - external[i];
    xsum[k] += x[i];
    count[k] += 1.0;
  }
  Vector xp(n);
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(find(i));
    if (pinned[k]) xp[i] = *pinned[k];
    else if (csum[k] > 0.0) xp[i] = rhs[k] / csum[k];
    else xp[i] = xsum[k] / count[k];
  }

  // Frozen signs must survive, and internal rows must be balanced by admissible flows.
  const Vector kp = in.K * xp;
  std::vector<Index> internal_rows, free_nodes;
  for (Index r = 0; r < m; ++r) {
    if (internal[static_cast<std::size_t>(r)]) {
      internal_rows.push_back(r);
    } else if (kp[r] * kx[r] <= 0.0) {
      return std::nullopt;
    }
  }
  for (Index i = 0; i < n; ++i)
    if (!in.fixed[static_cast<std::size_t>(i)]) free_nodes.push_back(i);
  Vector demand(static_cast<Index>(free_nodes.size()));
  Matrix Kt(static_cast<Index>(free_nodes.size()), static_cast<Index>(internal_rows.size()));
  double scale = 1.0;
  for (std::size_t q = 0; q < free_nodes.size(); ++q) {
    const Index i = free_nodes[q];
    demand[static_cast<Index>(q)] = -(in.c[i] * (xp[i] - in.a[i]) + external[i]);
    scale = std::max(scale, std::abs(external[i]) + std::abs(in.c[i] * (xp[i] - in.a[i])));
    for (std::size_t r = 0; r < internal_rows.size(); ++r)
      Kt(static_cast<Index>(q), static_cast<Index>(r)) = in.K(internal_rows[r], i);
  }
  Vector flow = Vector::Zero(static_cast<Index>(internal_rows.size()));
  if (!internal_rows.empty() && !free_nodes.empty()) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Kt);
    flow = cod.solve(demand);
  }
  if (free_nodes.size() && (Kt * flow - demand).cwiseAbs().maxCoeff() > 1e-11 * scale) return std::nullopt;
  for (std::size_t r = 0; r < internal_rows.size(); ++r)
    if (std::abs(flow[static_cast<Index>(r)]) > in.w[internal_rows[r]] * (1.0 + 1e-10)) return std::nullopt;
  return xp;
}

/// Chambolle-Pock for  sum_r w_r |(K x)_r| + (1/2) sum_i c_i (x_i - a_i)^2 + indicator(fixed coords).
inline SolveResult primal_dual(const SolveSpec& spec) {
  const Objective& obj = spec.objective;
  if (obj.smooth) throw Error("minimize: primal-dual-tv does not accept a general smooth part");
  if (obj.constraint && !obj.constraint->coordinate_fixing() && obj.constraint->A().rows() > 0 && obj.quadratic)
    throw Error("minimize: primal-dual-tv needs coordinate-fixing constraints when a quadratic is present");
  const Index n = obj.dim;

  // Separable l1 becomes extra identity rows of the coupling operator.
  Matrix K = obj.coupling;
  Vector w = obj.coupling_weights;
  if (obj.l1_weights.size()) {
    Matrix K2(K.rows() + n, n);
    K2 << K, Matrix::Identity(n, n);
    Vector w2(w.size() + n);
    w2 << w, obj.l1_weights;
    K = std::move(K2);
    w = std::move(w2);
  }
  const Vector c = obj.quadratic ? obj.quadratic->weight : Vector::Zero(n);
  const Vector a = obj.quadratic ? obj.quadratic->anchor : Vector::Zero(n);
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  if (obj.constraint && obj.constraint->coordinate_fixing())
    for (Index i : obj.constraint->fixed()) fixed[static_cast<std::size_t>(i)] = true;

  double mu = kInfinity;
  bool gap_available = true;
  for (Index i = 0; i < n; ++i) {
    if (fixed[static_cast<std::size_t>(i)]) continue;
    mu = std::min(mu, c[i]);
    if (c[i] <= 0.0) gap_available = false;
  }
  if (!std::isfinite(mu)) mu = 0.0;
  if (obj.constraint && !obj.constraint->coordinate_fixing() && obj.constraint->A().rows() > 0)
    gap_available = false;

  auto prox_g = [&](const Vector& z, double tau) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = (z[i] + tau * c[i] * a[i]) / (1.0 + tau * c[i]);
    if (obj.constraint) x = obj.constraint->project(x);
    return x;
  };
  auto primal_value = [&](const Vector& x) {
    return (w.array() * (K * x).array().abs()).sum() + 0.5 * (c.array() * (x - a).array().square()).sum();
  };
  Vector fixed_values = a;
  if (obj.constraint) fixed_values = obj.constraint->project(a);
  auto dual_value = [&](const Vector& y) {
    const Vector kty = K.transpose() * y;
    double d = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) {
        const double v = fixed_values[i];
        d += kty[i] * v + 0.5 * c[i] * (v - a[i]) * (v - a[i]);
      } else {
        d += kty[i] * a[i] - 0.5 * kty[i] * kty[i] / c[i];
      }
    }
    return d;
  };

  SolveResult res;
  res.method = Method::primal_dual_tv;
  Vector x = prox_g(spec.start.size() ? spec.start : a, 0.0);
  if (K.rows() == 0) {
    for (Index i = 0; i < n; ++i)
      if (c[i] > 0.0) x[i] = a[i];
    res.x = obj.constraint ? obj.constraint->project(x) : x;
    res.residual = 0.0;
    res.converged = true;
    return res;
  }
  const double knorm = operator_norm(K);
  double tau = 0.95 / knorm, sigma = 0.95 / knorm;
  Vector y = Vector::Zero(K.rows());
  Vector x_bar = x;
  for (int it = 1; it <= spec.max_iter; ++it) {
    const Vector x_old = x, y_old = y;
    y = (y + sigma * (K * x_bar)).cwiseMax(-w).cwiseMin(w);
    x = prox_g(x - tau * (K.transpose() * y), tau);
    double theta = 1.0;
    const double tau_old = tau, sigma_old = sigma;
    if (mu > 0.0) {
      theta = 1.0 / std::sqrt(1.0 + 2.0 * mu * tau);
      tau *= theta;
      sigma /= theta;
    }
    x_bar = x + theta * (x - x_old);

    if (it % 10 == 0 || it == spec.max_iter) {
      const Vector dx = x_old - x, dy = y_old - y;
      const double primal_res = (dx / tau_old - K.transpose() * dy).norm();
      const double dual_res = (dy / sigma_old - K * dx).norm();
      // With acceleration the step-size ratios drift and the fixed-point residuals lose their
      // meaning; the duality gap is used alone there.
      double r = mu > 0.0 ? 0.0 : std::max(primal_res, dual_res);
      if (gap_available) r = std::max(r, std::abs(primal_value(x) - dual_value(y)));
      if (r <= spec.tol) {
        res.x = x;
        res.residual = r;
        res.iterations = it;
        res.converged = true;
        return res;
      }
      res.residual = r;
    }
    if (it % 200 == 0) {
      const double xs = 1.0 + x.cwiseAbs().maxCoeff();
      for (double delta : {1e-4 * xs, 1e-6 * xs, 1e-8 * xs}) {
        if (auto xp = polish(PolishInput{K, w, c, a, fixed, fixed_values}, x, delta)) {
          res.x = *xp;
          res.residual = 0.0;
          res.iterations = it;
          res.converged = true;
          res.diagnostics = "finished by exact support identification";
          return res;
        }
      }
    }
  }
  res.x = x;
  res.iterations = spec.max_iter;
  res.converged = false;
  res.diagnostics = "max_iter reached";
  return res;
}

}  // namespace detail

inline Method choose_method(const Objective& obj) {
  return obj.has_coupling() ? Method::primal_dual_tv : Method::accelerated;
}

inline SolveResult minimize(const SolveSpec& spec) {
  require(spec.tol > 0.0, "minimize: tol must be positive");
  require(spec.max_iter >= 1, "minimize: max_iter must be >= 1");
  require(spec.start.size() == spec.objective.dim, "minimize: start has wrong dimension");
  if (spec.objective.constraint && !spec.objective.constraint->feasible())
    throw Error("minimize: constraint set is empty");
  Method m = spec.method == Method::automatic ? choose_method(spec.objective) : spec.method;
  if (spec.objective.has_coupling() && m != Method::primal_dual_tv && m != Method::subgradient_averaging)
    m = Method::primal_dual_tv;
  switch (m) {
    case Method::primal_dual_tv: return detail::primal_dual(spec);
    case Method::subgradient_averaging: return detail::subgradient_averaging(spec, spec.start, 1);
    case Method::proximal_gradient: return detail::gradient_method(spec, false);
    default: return detail::gradient_method(spec, true);
  }
}

/// argmin_x  lambda * sum_e w_e |x_a - x_b| + (1/2) ||x - anchor||_H^2
inline Vector tv_prox(const std::vector<Edge>& edges, const Vector& weights, const Vector& anchor, double lambda,
                      double tol = 1e-12, int max_iter = 1000000) {
  require(lambda >= 0.0, "tv_prox: lambda must be >= 0");
  require(weights.size() == anchor.size(), "tv_prox: weights and anchor differ in size");
  if (lambda == 0.0 || edges.empty()) return anchor;
  TotalVariation tv{edges};
  EnergyTerm term(tv, "tv");
  std::vector<Vector> rows;
  std::vector<double> w;
  term.append_l1_rows(rows, w, anchor.size());
  Objective obj;
  obj.dim = anchor.size();
  obj.quadratic = DiagonalQuadratic{weights, anchor};
  obj.coupling.resize(static_cast<Index>(rows.size()), anchor.size());
  obj.coupling_weights.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    obj.coupling.row(static_cast<Index>(r)) = rows[r].transpose();
    obj.coupling_weights[static_cast<Index>(r)] = lambda * w[r];
  }
  SolveSpec spec{obj, anchor, tol, max_iter, Method::primal_dual_tv};
  SolveResult r = minimize(spec);
  if (!r.converged)
    throw Error("tv_prox: primal-dual iteration did not converge (residual " + std::to_string(r.residual) + ")");
  return r.x;
}

}  // namespace jflow
