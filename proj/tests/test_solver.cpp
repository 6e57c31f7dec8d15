#include "jflow/solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace jflow;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Objective quadratic_objective(const Matrix& Q, const Vector& c) {
  Objective o;
  o.dim = Q.rows();
  o.smooth = [Q, c](const Vector& x, Vector* g) {
    if (g) *g = Q * x - c;
    return 0.5 * x.dot(Q * x) - c.dot(x);
  };
  return o;
}
}  // namespace

TEST(Minimize, ScalarQuadratic) {
  Objective o;
  o.dim = 1;
  o.quadratic = DiagonalQuadratic{vec({1.0}), vec({3.0})};
  const SolveResult r = minimize({o, vec({0.0}), 1e-10});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 3.0, 1e-10);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Minimize, SoftThresholdKillsSmallOffset) {
  Objective o;
  o.dim = 1;
  o.quadratic = DiagonalQuadratic{vec({1.0}), vec({0.3})};
  o.l1_weights = vec({1.0});
  const SolveResult r = minimize({o, vec({5.0}), 1e-10});
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.x[0], 0.0);
  o.quadratic->anchor = vec({2.5});
  EXPECT_NEAR(minimize({o, vec({0.0}), 1e-10}).x[0], 1.5, 1e-10);
}

TEST(Minimize, AffineConstraintIsExact) {
  Objective o = quadratic_objective(Matrix::Identity(3, 3), vec({1, 2, 3}));
  Matrix A(1, 3);
  A << 1, 1, 1;
  o.constraint = AffineConstraint(A, vec({0.0}));
  const SolveResult r = minimize({o, vec({0, 0, 0}), 1e-10});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x.sum(), 0.0, 1e-13);
  // Projection of (1,2,3) onto the plane sum = 0.
  EXPECT_LT((r.x - vec({-1, 0, 1})).norm(), 1e-9);

  Objective fix = quadratic_objective(Matrix::Identity(2, 2), vec({5, 5}));
  fix.constraint = AffineConstraint::fix(2, {1}, vec({-2.0}));
  const SolveResult f = minimize({fix, vec({0, 0}), 1e-10});
  EXPECT_EQ(f.x[1], -2.0);
  EXPECT_NEAR(f.x[0], 5.0, 1e-10);
}

TEST(Minimize, StronglyConvexErrorBoundHolds) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Matrix B(6, 6);
  for (Index i = 0; i < 36; ++i) B.data()[i] = n(rng);
  const Matrix Q = B * B.transpose() + 0.5 * Matrix::Identity(6, 6);
  const Vector c = B.col(0);
  const Vector exact = Q.ldlt().solve(c);
  const double strong = Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().minCoeff();
  for (double tol : {1e-4, 1e-6, 1e-9}) {
    const SolveResult r = minimize({quadratic_objective(Q, c), Vector::Zero(6), tol});
    ASSERT_TRUE(r.converged);
    EXPECT_LE((r.x - exact).norm(), r.residual / strong + 1e-12);
  }
}

TEST(Minimize, CauchyConsistencyWhenHalvingTol) {
  Matrix Q(3, 3);
  Q << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  const double strong = Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().minCoeff();
  const SolveResult a = minimize({quadratic_objective(Q, vec({1, -1, 2})), Vector::Zero(3), 1e-6});
  const SolveResult b = minimize({quadratic_objective(Q, vec({1, -1, 2})), Vector::Zero(3), 5e-7});
  EXPECT_LE((a.x - b.x).norm(), (a.residual + b.residual) / strong + 1e-15);
}

TEST(Minimize, DeterministicBitForBit) {
  Objective o;
  o.dim = 4;
  o.smooth = [](const Vector& x, Vector* g) {
    double v = 0;
    if (g) g->setZero(4);
    for (Index i = 0; i + 1 < 4; ++i) {
      const double d = x[i] - x[i + 1];
      v += std::pow(std::abs(d), 3) / 3;
      if (g) {
        (*g)[i] += d * std::abs(d);
        (*g)[i + 1] -= d * std::abs(d);
      }
    }
    return v;
  };
  o.quadratic = DiagonalQuadratic{Vector::Ones(4), vec({1, -2, 0.5, 3})};
  const SolveResult a = minimize({o, Vector::Zero(4), 1e-9});
  const SolveResult b = minimize({o, Vector::Zero(4), 1e-9});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Minimize, NonConvergenceIsReportedNotThrown) {
  Matrix Q(2, 2);
  Q << 1, 0, 0, 1e-4;
  const SolveResult r = minimize({quadratic_objective(Q, vec({1, 1})), Vector::Zero(2), 1e-14, 3});
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.residual, 1e-14);
  EXPECT_EQ(r.iterations, 3);
}

TEST(Minimize, RejectsBadSpecs) {
  Objective o = quadratic_objective(Matrix::Identity(2, 2), vec({0, 0}));
  EXPECT_THROW(minimize({o, Vector::Zero(2), 0.0}), Error);
  EXPECT_THROW(minimize({o, Vector::Zero(3), 1e-8}), Error);
  Matrix A(2, 2);
  A << 1, 1, 1, 1;
  o.constraint = AffineConstraint(A, vec({0, 1}));
  EXPECT_THROW(minimize({o, Vector::Zero(2), 1e-8}), Error);
}

TEST(TvProx, TwoNodeClosedForm) {
  const Vector x = tv_prox({{0, 1, 1.0}}, Vector::Ones(2), vec({0, 2}), 0.5);
  EXPECT_NEAR(x[0], 0.5, 1e-12);
  EXPECT_NEAR(x[1], 1.5, 1e-12);
  // Difference 2 shrinks by 2 lambda = 3 > 2: the pair fuses at the mean.
  const Vector fused = tv_prox({{0, 1, 1.0}}, Vector::Ones(2), vec({0, 2}), 1.5);
  EXPECT_NEAR(fused[0], 1.0, 1e-12);
  EXPECT_NEAR(fused[1], 1.0, 1e-12);
}

TEST(TvProx, TrivialCases) {
  const Vector a = vec({3, -1, 4});
  EXPECT_EQ(tv_prox({{0, 1, 1.0}, {1, 2, 1.0}}, Vector::Ones(3), a, 0.0), a);
  const Vector c = Vector::Constant(3, 2.5);
  EXPECT_LT((tv_prox({{0, 1, 1.0}, {1, 2, 1.0}}, Vector::Ones(3), c, 0.7) - c).norm(), 1e-12);
}

TEST(TvProx, MatchesBruteForceOnThreeNodes) {
  const std::vector<Edge> edges = {{0, 1, 1.0}, {1, 2, 0.5}, {2, kGround, 0.25}};
  const Vector w = vec({1.0, 2.0, 0.5}), a = vec({1.0, -0.5, 2.0});
  const double lambda = 0.4;
  auto F = [&](const Vector& x) {
    double tv = std::abs(x[0] - x[1]) + 0.5 * std::abs(x[1] - x[2]) + 0.25 * std::abs(x[2]);
    return lambda * tv + 0.5 * (w.array() * (x - a).array().square()).sum();
  };
  const Vector x = tv_prox(edges, w, a, lambda);
  // Coarse grid search, then local refinement around the best point.
  Vector best = Vector::Zero(3);
  double fb = kInfinity;
  for (double step : {0.05, 0.005, 0.0005}) {
    const Vector center = best;
    for (int i = -40; i <= 40; ++i)
      for (int j = -40; j <= 40; ++j)
        for (int k = -40; k <= 40; ++k) {
          const Vector y = center + step * vec({double(i), double(j), double(k)});
          const double f = F(y);
          if (f < fb) fb = f, best = y;
        }
  }
  EXPECT_LE(F(x), fb + 1e-12);
  EXPECT_LT((x - best).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(PrimalDual, WeightedL1WithPartialAnchoring) {
  // min |x0 - x1| + |x1 - x2| + (1/2)(x0 - 4)^2 with x2 fixed at 0: x1 is free with no quadratic.
  Objective o;
  o.dim = 3;
  o.coupling.resize(2, 3);
  o.coupling << 1, -1, 0, 0, 1, -1;
  o.coupling_weights = vec({1.0, 1.0});
  o.quadratic = DiagonalQuadratic{vec({1.0, 0.0, 0.0}), vec({4.0, 0.0, 0.0})};
  o.constraint = AffineConstraint::fix(3, {2}, vec({0.0}));
  const SolveResult r = minimize({o, Vector::Zero(3), 1e-9});
  ASSERT_TRUE(r.converged);
  // Optimal x0 = 3 (shrunk by the unit edge force), any x1 in [0, 3] is optimal.
  EXPECT_NEAR(r.x[0], 3.0, 1e-8);
  EXPECT_GE(r.x[1], -1e-8);
  EXPECT_LE(r.x[1], 3.0 + 1e-8);
  EXPECT_EQ(r.x[2], 0.0);
}
