#pragma once

// Composite extended-real energies on V = R^n and sampled convexity/coercivity probes.

#include "jflow/hilbert.hpp"
#include "jflow/jmap.hpp"

#include <cmath>
#include <cstdint>
#include <tuple>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace jflow {

/// Scalar primitive G with derivative g. `lipschitz` bounds the Lipschitz constant of g;
/// when `convex` is false only G + (L/2) z^2 is assumed convex.
struct ScalarPrimitive {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double lipschitz = 0.0;
  bool convex = true;

  double semiconvexity() const { return convex ? 0.0 : lipschitz; }
};

/// Edge endpoint meaning "a node held at zero" (eliminated Dirichlet data).
inline constexpr Index kGround = -1;

struct Edge {
  Index a = 0;
  Index b = kGround;
  double weight = 1.0;
};

/// (1/p) sum_e w_e |x_a - x_b|^p
struct PEdgeEnergy {
  std::vector<Edge> edges;
  double p = 2.0;
};

/// sum_k w_k G(x_{node_k})
struct NodewiseIntegral {
  std::vector<Index> nodes;
  Vector weights;
  ScalarPrimitive primitive;
};

/// (1/2) x^T Q x
struct QuadraticForm {
  Matrix Q;
};

/// sum_e w_e |x_a - x_b|
struct TotalVariation {
  std::vector<Edge> edges;
};

/// 0 on {A x = b}, +inf elsewhere
struct AffineIndicator {
  Matrix A;
  Vector b;
};

/// c^T x
struct LinearForm {
  Vector c;
};

using TermKind =
    std::variant<PEdgeEnergy, NodewiseIntegral, QuadraticForm, TotalVariation, AffineIndicator, LinearForm>;

enum class Smoothness { smooth_with_gradient, prox_friendly, subgradient_only };

inline double edge_difference(const Edge& e, const Vector& y) {
  return e.b == kGround ? y[e.a] : y[e.a] - y[e.b];
}

/// One energy term, optionally composed with a linear input map (the term sees input * x).
class EnergyTerm {
 public:
  EnergyTerm(TermKind kind, std::string label = {}) : kind_(std::move(kind)), label_(std::move(label)) {
    validate();
  }
  EnergyTerm(TermKind kind, Matrix input, std::string label)
      : kind_(std::move(kind)), input_(std::move(input)), label_(std::move(label)) {
    validate();
  }

  const TermKind& kind() const { return kind_; }
  const std::optional<Matrix>& input() const { return input_; }
  const std::string& label() const { return label_; }

  Smoothness smoothness() const {
    if (const auto* pe = std::get_if<PEdgeEnergy>(&kind_)) return pe->p > 1.0 ? Smoothness::smooth_with_gradient : Smoothness::prox_friendly;
    if (std::holds_alternative<TotalVariation>(kind_) || std::holds_alternative<AffineIndicator>(kind_))
      return Smoothness::prox_friendly;
    return Smoothness::smooth_with_gradient;
  }
  bool smooth() const { return smoothness() == Smoothness::smooth_with_gradient; }

  /// Term value at x; +inf for violated indicators.
  double value(const Vector& x, double indicator_tol = 1e-9) const {
    const Vector y = input_ ? Vector(*input_ * x) : x;
    return std::visit([&](const auto& t) { return term_value(t, y, indicator_tol); }, kind_);
  }

  /// Adds the gradient at x to `grad` (smooth terms only).
  void add_gradient(const Vector& x, Vector& grad) const {
    require(smooth(), "EnergyTerm::add_gradient: term '" + label_ + "' is not smooth");
    const Vector y = input_ ? Vector(*input_ * x) : x;
    Vector gy = Vector::Zero(y.size());
    std::visit([&](const auto& t) { term_gradient(t, y, gy); }, kind_);
    if (input_)
      grad += input_->transpose() * gy;
    else
      grad += gy;
  }

  /// Adds the Hessian at x to `hess` (smooth terms only). Edge curvature w (p-1)|d|^(p-2) is
  /// capped at the rounding resolution of d when p < 2; nodewise terms difference their declared derivative.
  void add_hessian(const Vector& x, Matrix& hess) const {
    require(smooth(), "EnergyTerm::add_hessian: term '" + label_ + "' is not smooth");
    const Vector y = input_ ? Vector(*input_ * x) : x;
    Matrix hy = Matrix::Zero(y.size(), y.size());
    std::visit([&](const auto& t) { term_hessian(t, y, hy); }, kind_);
    if (input_)
      hess += input_->transpose() * hy * *input_;
    else
      hess += hy;
  }

  /// Rows of the weighted l1 coupling sum_r w_r |(K x)_r| carried by this term.
  void append_l1_rows(std::vector<Vector>& rows, std::vector<double>& weights, Index dim) const {
    const std::vector<Edge>* edges = nullptr;
    if (const auto* tv = std::get_if<TotalVariation>(&kind_)) edges = &tv->edges;
    if (const auto* pe = std::get_if<PEdgeEnergy>(&kind_); pe && pe->p == 1.0) edges = &pe->edges;
    if (!edges) return;
    const Index m = input_ ? input_->rows() : dim;
    for (const Edge& e : *edges) {
      Vector r = Vector::Zero(m);
      r[e.a] += 1.0;
      if (e.b != kGround) r[e.b] -= 1.0;
      rows.push_back(input_ ? Vector(input_->transpose() * r) : r);
      weights.push_back(e.weight);
    }
  }

  /// Constraint rows (A * input, b) when the term is an indicator.
  std::optional<std::pair<Matrix, Vector>> constraint() const {
    if (const auto* ind = std::get_if<AffineIndicator>(&kind_))
      return std::make_pair(input_ ? Matrix(ind->A * *input_) : ind->A, ind->b);
    return std::nullopt;
  }

  /// Positive semidefinite matrix D with term + (1/2) x^T D x convex (0 for convex terms).
  Matrix concavity(Index dim) const {
    Matrix d = Matrix::Zero(input_ ? input_->rows() : dim, input_ ? input_->rows() : dim);
    if (const auto* nw = std::get_if<NodewiseIntegral>(&kind_)) {
      const double l = nw->primitive.semiconvexity();
      for (std::size_t k = 0; k < nw->nodes.size(); ++k)
        d(nw->nodes[k], nw->nodes[k]) += l * nw->weights[static_cast<Index>(k)];
    } else if (const auto* q = std::get_if<QuadraticForm>(&kind_)) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (q->Q + q->Q.transpose()));
      const Vector neg = (-es.eigenvalues()).cwiseMax(0.0);
      d = es.eigenvectors() * neg.asDiagonal() * es.eigenvectors().transpose();
    }
    if (input_) return input_->transpose() * d * *input_;
    return d;
  }

 private:
  void validate() const {
    if (const auto* pe = std::get_if<PEdgeEnergy>(&kind_)) {
      require(pe->p >= 1.0, "PEdgeEnergy: exponent must be >= 1");
      for (const Edge& e : pe->edges) require(e.weight > 0.0, "PEdgeEnergy: edge weights must be positive");
    }
    if (const auto* tv = std::get_if<TotalVariation>(&kind_))
      for (const Edge& e : tv->edges) require(e.weight > 0.0, "TotalVariation: edge weights must be positive");
    if (const auto* nw = std::get_if<NodewiseIntegral>(&kind_))
      require(static_cast<Index>(nw->nodes.size()) == nw->weights.size(), "NodewiseIntegral: size mismatch");
    if (const auto* ind = std::get_if<AffineIndicator>(&kind_))
      require(ind->A.rows() == ind->b.size(), "AffineIndicator: shape mismatch");
  }

  static double term_value(const PEdgeEnergy& t, const Vector& y, double) {
    double s = 0.0;
    for (const Edge& e : t.edges) s += e.weight * std::pow(std::abs(edge_difference(e, y)), t.p);
    return s / t.p;
  }
  static double term_value(const NodewiseIntegral& t, const Vector& y, double) {
    double s = 0.0;
    for (std::size_t k = 0; k < t.nodes.size(); ++k)
      s += t.weights[static_cast<Index>(k)] * t.primitive.value(y[t.nodes[k]]);
    return s;
  }
  static double term_value(const QuadraticForm& t, const Vector& y, double) { return 0.5 * y.dot(t.Q * y); }
  static double term_value(const TotalVariation& t, const Vector& y, double) {
    double s = 0.0;
    for (const Edge& e : t.edges) s += e.weight * std::abs(edge_difference(e, y));
    return s;
  }
  static double term_value(const AffineIndicator& t, const Vector& y, double tol) {
    if (t.A.rows() == 0) return 0.0;
    return (t.A * y - t.b).cwiseAbs().maxCoeff() <= tol ? 0.0 : kInfinity;
  }
  static double term_value(const LinearForm& t, const Vector& y, double) { return t.c.dot(y); }

  static void term_gradient(const PEdgeEnergy& t, const Vector& y, Vector& g) {
    for (const Edge& e : t.edges) {
      const double d = edge_difference(e, y);
      double flux = 0.0;
      if (t.p == 2.0)
        flux = d;
      else if (d != 0.0)
        flux = std::pow(std::abs(d), t.p - 1.0) * (d > 0 ? 1.0 : -1.0);
      flux *= e.weight;
      g[e.a] += flux;
      if (e.b != kGround) g[e.b] -= flux;
    }
  }
  static void term_gradient(const NodewiseIntegral& t, const Vector& y, Vector& g) {
    for (std::size_t k = 0; k < t.nodes.size(); ++k)
      g[t.nodes[k]] += t.weights[static_cast<Index>(k)] * t.primitive.derivative(y[t.nodes[k]]);
  }
  static void term_gradient(const QuadraticForm& t, const Vector& y, Vector& g) { g += t.Q * y; }
  static void term_gradient(const LinearForm& t, const Vector&, Vector& g) { g += t.c; }
  static void term_gradient(const TotalVariation&, const Vector&, Vector&) {}

  static void term_hessian(const PEdgeEnergy& t, const Vector& y, Matrix& h) {
    for (const Edge& e : t.edges) {
      // |d| below the spacing of the endpoint values is not resolved; cap the curvature there.
      const double ya = std::abs(y[e.a]), yb = e.b == kGround ? 0.0 : std::abs(y[e.b]);
      const double resolution = std::max(4.0 * std::numeric_limits<double>::epsilon() * std::max(ya, yb), 1e-20);
      const double d = std::max(std::abs(edge_difference(e, y)), resolution);
      const double c = e.weight * (t.p == 2.0 ? 1.0 : (t.p - 1.0) * std::pow(d, t.p - 2.0));
      h(e.a, e.a) += c;
      if (e.b != kGround) {
        h(e.b, e.b) += c;
        h(e.a, e.b) -= c;
        h(e.b, e.a) -= c;
      }
    }
  }
  static void term_hessian(const NodewiseIntegral& t, const Vector& y, Matrix& h) {
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
      const double s = y[t.nodes[k]], step = 1e-6 * (1.0 + std::abs(s));
      const double second = (t.primitive.derivative(s + step) - t.primitive.derivative(s - step)) / (2.0 * step);
      h(t.nodes[k], t.nodes[k]) += t.weights[static_cast<Index>(k)] * second;
    }
  }
  static void term_hessian(const QuadraticForm& t, const Vector&, Matrix& h) { h += 0.5 * (t.Q + t.Q.transpose()); }
  static void term_hessian(const LinearForm&, const Vector&, Matrix&) {}
  static void term_hessian(const TotalVariation&, const Vector&, Matrix&) {}
  static void term_hessian(const AffineIndicator&, const Vector&, Matrix&) {}
  static void term_gradient(const AffineIndicator&, const Vector&, Vector&) {}

  TermKind kind_;
  std::optional<Matrix> input_;
  std::string label_;
};

/// Affine description {x : A x = b} of the effective domain together with a
/// particular point and an orthonormal basis of directions inside it.
struct AffineDomain {
  Matrix A;
  Vector b;
  Vector point;
  Matrix directions;
  bool empty = false;
};

class ExtendedFunctional {
 public:
  ExtendedFunctional() = default;
  explicit ExtendedFunctional(Index dim) : dim_(dim) {}
  ExtendedFunctional(Index dim, std::vector<EnergyTerm> terms) : dim_(dim), terms_(std::move(terms)) {}

  Index dim() const { return dim_; }
  const std::vector<EnergyTerm>& terms() const { return terms_; }

  ExtendedFunctional& add(EnergyTerm term) {
    terms_.push_back(std::move(term));
    return *this;
  }

  double value(const Vector& x, double indicator_tol = 1e-9) const {
    require(x.size() == dim_, "ExtendedFunctional::value: dimension mismatch");
    double s = 0.0;
    for (const auto& t : terms_) {
      const double v = t.value(x, indicator_tol);
      if (v == kInfinity) return kInfinity;
      s += v;
    }
    return s;
  }
  double operator()(const Vector& x) const { return value(x); }

  /// Value and gradient of the smooth terms only.
  double smooth_value(const Vector& x, Vector* grad) const {
    double s = 0.0;
    if (grad) grad->setZero(dim_);
    for (const auto& t : terms_) {
      if (!t.smooth()) continue;
      s += t.value(x);
      if (grad) t.add_gradient(x, *grad);
    }
    return s;
  }

  /// Hessian of the smooth terms.
  Matrix smooth_hessian(const Vector& x) const {
    Matrix h = Matrix::Zero(dim_, dim_);
    for (const auto& t : terms_)
      if (t.smooth()) t.add_hessian(x, h);
    return h;
  }

  bool all_smooth() const {
    for (const auto& t : terms_)
      if (!t.smooth()) return false;
    return true;
  }

  bool has_l1_coupling() const {
    std::vector<Vector> rows;
    std::vector<double> w;
    for (const auto& t : terms_) t.append_l1_rows(rows, w, dim_);
    return !rows.empty();
  }

  /// Stacked operator K and weights of every l1 coupling term.
  std::pair<Matrix, Vector> l1_coupling() const {
    std::vector<Vector> rows;
    std::vector<double> w;
    for (const auto& t : terms_) t.append_l1_rows(rows, w, dim_);
    Matrix K(static_cast<Index>(rows.size()), dim_);
    Vector weights(static_cast<Index>(w.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      K.row(static_cast<Index>(r)) = rows[r].transpose();
      weights[static_cast<Index>(r)] = w[r];
    }
    return {K, weights};
  }

  /// Stacked indicator constraints.
  std::pair<Matrix, Vector> constraints() const {
    Matrix A(0, dim_);
    Vector b(0);
    for (const auto& t : terms_) {
      if (auto c = t.constraint()) {
        Matrix A2(A.rows() + c->first.rows(), dim_);
        A2 << A, c->first;
        Vector b2(b.size() + c->second.size());
        b2 << b, c->second;
        A = std::move(A2);
        b = std::move(b2);
      }
    }
    return {A, b};
  }

  AffineDomain domain() const {
    AffineDomain d;
    std::tie(d.A, d.b) = constraints();
    if (d.A.rows() == 0) {
      d.point = Vector::Zero(dim_);
      d.directions = Matrix::Identity(dim_, dim_);
      return d;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(d.A);
    cod.setThreshold(1e-12);
    d.point = cod.solve(d.b);
    d.empty = (d.A * d.point - d.b).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + d.b.cwiseAbs().maxCoeff());
    d.directions = kernel_basis(JMap(d.A));
    return d;
  }

  /// Sum over terms of the concavity matrices.
  Matrix concavity() const {
    Matrix d = Matrix::Zero(dim_, dim_);
    for (const auto& t : terms_) d += t.concavity(dim_);
    return d;
  }

 private:
  Index dim_ = 0;
  std::vector<EnergyTerm> terms_;
};

inline double evaluate(const ExtendedFunctional& E, const Vector& u_hat) { return E.value(u_hat); }

/// E(x) + (omega/2) ||j x||_H^2
inline double shifted_value(const ExtendedFunctional& E, const JMap& j, const WeightedSpace& H, double omega,
                            const Vector& u_hat) {
  require(j.cols() == E.dim() && j.rows() == H.dim(), "shifted_value: j does not match E and H");
  const double e = E.value(u_hat);
  if (e == kInfinity) return kInfinity;
  const Vector ju = j(u_hat);
  return e + 0.5 * omega * inner(H, ju, ju);
}

/// j^T M j, the Gram operator of the H-metric pulled back to V.
inline Matrix pulled_back_metric(const JMap& j, const WeightedSpace& H) {
  return j.matrix().transpose() * H.weights().asDiagonal() * j.matrix();
}

/// E_omega as a functional in its own right.
inline ExtendedFunctional shifted(const ExtendedFunctional& E, const JMap& j, const WeightedSpace& H, double omega) {
  ExtendedFunctional out = E;
  if (omega != 0.0) out.add(EnergyTerm(QuadraticForm{omega * pulled_back_metric(j, H)}, "shift"));
  return out;
}

/// Smallest omega >= 0 with D <= omega j^T M j; +inf when D reaches into ker j.
inline double required_shift(const Matrix& concavity, const JMap& j, const WeightedSpace& H) {
  const double scale = concavity.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(pulled_back_metric(j, H));
  const Vector& lam = es.eigenvalues();
  const double cut = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  std::vector<Index> range, kernel;
  for (Index i = 0; i < lam.size(); ++i) (lam[i] > cut ? range : kernel).push_back(i);
  for (Index k : kernel)
    if ((concavity * es.eigenvectors().col(k)).norm() > 1e-12 * scale) return kInfinity;
  if (range.empty()) return 0.0;
  Matrix W(concavity.rows(), static_cast<Index>(range.size()));
  for (std::size_t c = 0; c < range.size(); ++c)
    W.col(static_cast<Index>(c)) = es.eigenvectors().col(range[c]) / std::sqrt(lam[range[c]]);
  Eigen::SelfAdjointEigenSolver<Matrix> inner_es(W.transpose() * concavity * W);
  return std::max(0.0, inner_es.eigenvalues().maxCoeff());
}

/// Declared semiconvexity constant of one term relative to (j, H).
inline double semiconvexity_constant(const EnergyTerm& term, Index dim, const JMap& j, const WeightedSpace& H) {
  return required_shift(term.concavity(dim), j, H);
}

using ScalarField = std::function<double(const Vector&)>;

struct SamplingOptions {
  int trials = 200;
  std::uint64_t seed = 0;
  double radius = 10.0;
  Vector center;          // defaults to the origin
  Matrix directions;      // columns spanning the sampled affine set; defaults to the identity
};

struct ConvexityReport {
  double max_violation = -kInfinity;
  Vector witness_u, witness_v;
  double witness_theta = 0.0;
  int finite_samples = 0;
};

/// max over sampled (u, v, theta) of F(theta u + (1-theta) v) - theta F(u) - (1-theta) F(v).
inline ConvexityReport sample_convexity(const ScalarField& F, Index dim, const SamplingOptions& opt = {}) {
  const Vector center = opt.center.size() ? opt.center : Vector::Zero(dim);
  const Matrix dirs = opt.directions.size() ? opt.directions : Matrix::Identity(dim, dim);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(-opt.radius, opt.radius);
  auto draw = [&] {
    Vector z(dirs.cols());
    for (Index i = 0; i < z.size(); ++i) z[i] = uni(rng);
    return Vector(center + dirs * z);
  };
  ConvexityReport rep;
  for (int t = 0; t < opt.trials; ++t) {
    const Vector u = draw(), v = draw();
    const double fu = F(u), fv = F(v);
    if (!std::isfinite(fu) || !std::isfinite(fv)) continue;
    ++rep.finite_samples;
    for (double theta : {0.25, 0.5, 0.75}) {
      const double mid = F(theta * u + (1.0 - theta) * v);
      const double gap = mid - theta * fu - (1.0 - theta) * fv;
      if (gap > rep.max_violation) {
        rep.max_violation = gap;
        rep.witness_u = u;
        rep.witness_v = v;
        rep.witness_theta = theta;
      }
    }
  }
  if (rep.finite_samples == 0) throw Error("sample_convexity: no finite samples (domain not found)");
  return rep;
}

struct CoercivityOptions {
  int trials = 64;
  std::uint64_t seed = 0;
  double radius_cap = 1e6;
  Vector start;        // a point of the effective domain; defaults to the origin
  Matrix directions;   // directions of the effective domain; defaults to the identity
};

struct CoercivityReport {
  bool bounded = true;
  std::vector<double> radius;   // per level: largest ray radius staying inside the sublevel set
};

/// Ray probes of the sublevel sets {F_omega <= c}. Coordinate axes are always probed.
inline CoercivityReport sample_coercivity(const ScalarField& F, double omega, const JMap& j, const WeightedSpace& H,
                                          const std::vector<double>& levels, const CoercivityOptions& opt = {}) {
  const Index dim = j.cols();
  const Vector x0 = opt.start.size() ? opt.start : Vector::Zero(dim);
  const Matrix dirs = opt.directions.size() ? opt.directions : Matrix::Identity(dim, dim);
  auto Fw = [&](const Vector& x) {
    const double f = F(x);
    if (!std::isfinite(f)) return kInfinity;
    const Vector jx = j(x);
    return f + 0.5 * omega * inner(H, jx, jx);
  };
  std::vector<Vector> rays;
  for (Index c = 0; c < dirs.cols(); ++c) {
    rays.push_back(dirs.col(c));
    rays.push_back(-dirs.col(c));
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  for (int t = 0; t < opt.trials; ++t) {
    Vector z(dirs.cols());
    for (Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    if (z.norm() == 0.0) continue;
    rays.push_back(dirs * z / z.norm());
  }

  CoercivityReport rep;
  for (double level : levels) {
    double worst = 0.0;
    for (const Vector& d : rays) {
      auto inside = [&](double r) { return Fw(x0 + r * d) <= level; };
      if (!inside(0.0)) continue;
      double lo = 0.0, hi = 1e-3;
      while (hi <= opt.radius_cap && inside(hi)) {
        lo = hi;
        hi *= 2.0;
      }
      if (hi > opt.radius_cap) {
        rep.bounded = false;
        worst = kInfinity;
        continue;
      }
      for (int it = 0; it < 80 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (inside(mid) ? lo : hi) = mid;
      }
      worst = std::max(worst, lo);
    }
    rep.radius.push_back(worst);
  }
  return rep;
}

}  // namespace jflow
