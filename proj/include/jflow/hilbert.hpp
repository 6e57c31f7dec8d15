#pragma once

// Finite weighted model of L^2(Sigma): inner products, lattice operations,
// L^q and Orlicz norms, and exact projections onto closed convex sets.

#include "jflow/common.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <random>
#include <utility>

namespace jflow {

/// Node set with strictly positive measure. All H-norms are weighted by it.
class WeightedSpace {
 public:
  WeightedSpace() = default;

  explicit WeightedSpace(Vector weights) : weights_(std::move(weights)) {
    require(weights_.size() > 0, "WeightedSpace: empty node set");
    for (Index i = 0; i < weights_.size(); ++i)
      require(weights_[i] > 0.0 && std::isfinite(weights_[i]),
              "WeightedSpace: weights must be strictly positive");
  }

  static WeightedSpace uniform(Index dim, double weight = 1.0) {
    return WeightedSpace(Vector::Constant(dim, weight));
  }

  Index dim() const { return weights_.size(); }
  const Vector& weights() const { return weights_; }
  double measure() const { return weights_.sum(); }

  void check(const Vector& u, const char* where) const {
    if (u.size() != dim())
      throw Error(std::string(where) + ": expected a vector of dimension " +
                  std::to_string(dim()) + ", got " + std::to_string(u.size()));
  }

 private:
  Vector weights_;
};

inline double inner(const WeightedSpace& space, const Vector& u, const Vector& v) {
  space.check(u, "inner");
  space.check(v, "inner");
  double s = 0.0;
  for (Index i = 0; i < u.size(); ++i) s += space.weights()[i] * u[i] * v[i];
  return s;
}

inline double norm(const WeightedSpace& space, const Vector& u) {
  return std::sqrt(inner(space, u, u));
}

struct Lattice {
  Vector meet;
  Vector join;
};

inline Lattice lattice(const WeightedSpace& space, const Vector& u, const Vector& v) {
  space.check(u, "lattice");
  space.check(v, "lattice");
  return {u.cwiseMin(v), u.cwiseMax(v)};
}

inline Vector positive_part(const Vector& u) { return u.cwiseMax(0.0); }
inline Vector negative_part(const Vector& u) { return (-u).cwiseMax(0.0); }

/// Weighted L^q norm; q = infinity is the (unweighted) maximum modulus.
inline double lq_norm(const WeightedSpace& space, const Vector& u, double q) {
  space.check(u, "lq_norm");
  require(q >= 1.0, "lq_norm: q must be >= 1");
  if (std::isinf(q)) return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
  const double scale = u.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (Index i = 0; i < u.size(); ++i)
    s += space.weights()[i] * std::pow(std::abs(u[i]) / scale, q);
  return scale * std::pow(s, 1.0 / q);
}

/// Convex psi : [0, inf) -> [0, inf) with psi(0) = 0.
struct NFunction {
  enum class Kind { power, huber, threshold, custom };

  Kind kind = Kind::custom;
  double parameter = 0.0;
  std::function<double(double)> evaluate;
  std::string label;

  double operator()(double s) const { return evaluate(s); }

  /// psi(s) = s^q
  static NFunction power(double q) {
    require(q >= 1.0, "NFunction::power: q must be >= 1");
    return {Kind::power, q, [q](double s) { return std::pow(std::abs(s), q); },
            "power(" + format_number(q) + ")"};
  }
  /// Quadratic near zero, linear beyond delta.
  static NFunction huber(double delta) {
    require(delta > 0.0, "NFunction::huber: delta must be positive");
    return {Kind::huber, delta,
            [delta](double s) {
              const double a = std::abs(s);
              return a <= delta ? 0.5 * a * a / delta : a - 0.5 * delta;
            },
            "huber(" + format_number(delta) + ")"};
  }
  /// psi(s) = (s - k)^+
  static NFunction threshold(double k) {
    require(k >= 0.0, "NFunction::threshold: k must be >= 0");
    return {Kind::threshold, k, [k](double s) { return std::max(std::abs(s) - k, 0.0); },
            "threshold(" + format_number(k) + ")"};
  }
  static NFunction custom(std::function<double(double)> f, std::string label = "custom") {
    return {Kind::custom, 0.0, std::move(f), std::move(label)};
  }

  static std::string format_number(double x) {
    std::string s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

/// Sampled membership test for the class J0 (convex, psi(0) = 0, nonnegative).
/// With `require_n_function` the growth limits at 0 and infinity are probed too.
inline bool is_admissible(const NFunction& psi, bool require_n_function) {
  if (std::abs(psi(0.0)) > 1e-14) return false;
  const double grid[] = {0.0, 1e-3, 0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 3.5, 10.0, 100.0};
  for (double a : grid) {
    if (psi(a) < 0.0) return false;
    for (double b : grid) {
      const double mid = psi(0.5 * (a + b));
      if (mid > 0.5 * (psi(a) + psi(b)) + 1e-12 * (1.0 + std::abs(psi(a)) + std::abs(psi(b))))
        return false;
    }
  }
  if (!require_n_function) return true;
  return psi(1e-6) / 1e-6 < 1e-2 && psi(1e6) / 1e6 > 1e2;
}

inline double modular(const WeightedSpace& space, const Vector& u, const NFunction& psi) {
  double s = 0.0;
  for (Index i = 0; i < u.size(); ++i) s += space.weights()[i] * psi(std::abs(u[i]));
  return s;
}

/// Luxemburg norm inf{a > 0 : sum_i w_i psi(|u_i| / a) <= 1} by bisection.
inline double orlicz_norm(const WeightedSpace& space, const Vector& u, const NFunction& psi,
                          double tol = 1e-12) {
  space.check(u, "orlicz_norm");
  require(tol > 0.0, "orlicz_norm: tol must be positive");
  const double sup = u.cwiseAbs().maxCoeff();
  if (sup == 0.0) return 0.0;
  auto m = [&](double alpha) { return modular(space, Vector(u / alpha), psi); };

  double hi = sup, lo = sup;
  int guard = 0;
  while (!(m(hi) <= 1.0)) {
    hi *= 2.0;
    if (++guard > 2000) throw Error("orlicz_norm: no upper bracket (degenerate psi)");
  }
  guard = 0;
  while (m(lo) <= 1.0) {
    lo *= 0.5;
    if (++guard > 2000 || lo == 0.0) throw Error("orlicz_norm: no lower bracket (degenerate psi)");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (m(mid) <= 1.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-3 * tol * hi && m(hi) >= 1.0 - tol) break;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
  }
  return hi;
}

/// Closed convex subset of a weighted space, given by its exact H-orthogonal projection.
class ConvexSetOracle {
 public:
  enum class Kind { positive_cone, box, order_cone, affine_subspace, custom };

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }

  Vector project(const Vector& u) const { return project_(u); }

  bool contains(const Vector& u, double tol = 1e-12) const {
    return (project(u) - u).cwiseAbs().maxCoeff() <= tol * (1.0 + u.cwiseAbs().maxCoeff());
  }

  /// Largest componentwise distance from the set.
  double distance_inf(const Vector& u) const {
    return u.size() == 0 ? 0.0 : (project(u) - u).cwiseAbs().maxCoeff();
  }

  static ConvexSetOracle positive_cone() {
    return {Kind::positive_cone, "positive-cone", [](const Vector& u) { return positive_part(u); }};
  }

  /// Componentwise box; infinite bounds are allowed (box(-inf, inf) is the whole space).
  static ConvexSetOracle box(double lo, double hi) {
    require(lo <= hi, "box: empty interval");
    return {Kind::box, "box[" + NFunction::format_number(lo) + "," + NFunction::format_number(hi) + "]",
            [lo, hi](const Vector& u) { return Vector(u.cwiseMax(lo).cwiseMin(hi)); }};
  }

  static ConvexSetOracle whole_space() { return box(-kInfinity, kInfinity); }

  /// {(u, v) : u <= v} in the product space H x H, vectors laid out as [u; v].
  /// `product` carries the weights of both factors.
  static ConvexSetOracle order_cone(const WeightedSpace& product) {
    require(product.dim() % 2 == 0, "order_cone: product space must have even dimension");
    const Vector w = product.weights();
    return {Kind::order_cone, "order-cone", [w](const Vector& x) {
              require(x.size() == w.size(), "order_cone: dimension mismatch");
              const Index m = x.size() / 2;
              Vector y = x;
              for (Index i = 0; i < m; ++i) {
                if (x[i] > x[m + i]) {
                  const double mean = (w[i] * x[i] + w[m + i] * x[m + i]) / (w[i] + w[m + i]);
                  y[i] = mean;
                  y[m + i] = mean;
                }
              }
              return y;
            }};
  }

  /// {u : A u = b}, projected in the weighted metric of `space`.
  static ConvexSetOracle affine_subspace(const WeightedSpace& space, const Matrix& A, const Vector& b) {
    require(A.cols() == space.dim() && A.rows() == b.size(), "affine_subspace: shape mismatch");
    const Vector inv_w = space.weights().cwiseInverse();
    const Matrix AW = A * inv_w.asDiagonal();
    const Matrix gram = AW * A.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
    const Matrix gram_pinv = cod.pseudoInverse();
    const Vector particular = AW.transpose() * (gram_pinv * b);
    require((A * particular - b).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff()),
            "affine_subspace: inconsistent system (empty set)");
    const Matrix correction = AW.transpose() * gram_pinv;
    return {Kind::affine_subspace, "affine-subspace", [A, b, correction](const Vector& u) {
              return Vector(u - correction * (A * u - b));
            }};
  }

  /// A user projection. It is sampled on `space` and rejected if it is not
  /// idempotent or not 1-Lipschitz.
  static ConvexSetOracle custom(std::function<Vector(const Vector&)> projection,
                                const WeightedSpace& space, std::uint64_t seed = 0,
                                std::string label = "custom") {
    ConvexSetOracle set{Kind::custom, std::move(label), std::move(projection)};
    validate(set, space, 100, seed, 1e-10);
    return set;
  }

  /// Samples idempotence and nonexpansiveness; throws on failure.
  static void validate(const ConvexSetOracle& set, const WeightedSpace& space, int trials,
                       std::uint64_t seed, double tol) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 3.0);
    auto draw = [&] {
      Vector x(space.dim());
      for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
      return x;
    };
    for (int t = 0; t < trials; ++t) {
      const Vector u = draw(), v = draw();
      const Vector pu = set.project(u), pv = set.project(v);
      if ((set.project(pu) - pu).cwiseAbs().maxCoeff() > tol * (1.0 + pu.cwiseAbs().maxCoeff()))
        throw Error("ConvexSetOracle '" + set.label() + "': projection is not idempotent");
      if (norm(space, Vector(pu - pv)) > norm(space, Vector(u - v)) + tol)
        throw Error("ConvexSetOracle '" + set.label() + "': projection is not nonexpansive");
    }
  }

 private:
  ConvexSetOracle(Kind kind, std::string label, std::function<Vector(const Vector&)> projection)
      : kind_(kind), label_(std::move(label)), project_(std::move(projection)) {}

  Kind kind_;
  std::string label_;
  std::function<Vector(const Vector&)> project_;
};

inline Vector project(const ConvexSetOracle& set, const Vector& u) { return set.project(u); }

}  // namespace jflow
