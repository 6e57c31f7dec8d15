#pragma once

// Finite-difference pairs on chains and rectangular grids: Robin and Dirichlet-to-Neumann
// problems, the parabolic-elliptic coupled system, total variation, and the classical
// Dirichlet / Neumann p-Laplacians used as comparison references.
//
// Scalings (d = 1 for chains, 2 for grids, h the cell size):
//   p-edge energy      (1/p) sum_edges h^(d-p) |u_a - u_b|^p   ~ (1/p) int |grad u|^p
//   interior G          h^d per node
//   boundary B          h^(d-1) per node
//   total variation     h^(d-1) per edge
//   H = L2(nodes)       h^d per node (boundary nodes of the DtN problem: h^(d-1))

#include "jflow/jpair.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace jflow {

class GridSpec {
 public:
  enum class Topology { chain, grid };

  static GridSpec chain(Index n, double h = 0.0) {
    require(n >= 2, "GridSpec::chain: need at least 2 nodes");
    GridSpec g;
    g.topology_ = Topology::chain;
    g.nx_ = n;
    g.ny_ = 1;
    g.h_ = h > 0.0 ? h : 1.0 / static_cast<double>(n - 1);
    return g;
  }

  static GridSpec grid(Index nx, Index ny, double h = 0.0) {
    require(nx >= 2 && ny >= 2, "GridSpec::grid: need at least 2 x 2 nodes");
    GridSpec g;
    g.topology_ = Topology::grid;
    g.nx_ = nx;
    g.ny_ = ny;
    g.h_ = h > 0.0 ? h : 1.0 / static_cast<double>(nx - 1);
    return g;
  }

  Topology topology() const { return topology_; }
  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index nodes() const { return nx_ * ny_; }
  int dimension() const { return topology_ == Topology::chain ? 1 : 2; }
  double h() const { return h_; }
  Index node(Index i, Index j = 0) const { return i + nx_ * j; }

  /// Nearest-neighbour pairs (a < b), each listed once.
  std::vector<std::pair<Index, Index>> neighbours() const {
    std::vector<std::pair<Index, Index>> out;
    for (Index j = 0; j < ny_; ++j)
      for (Index i = 0; i < nx_; ++i) {
        if (i + 1 < nx_) out.emplace_back(node(i, j), node(i + 1, j));
        if (topology_ == Topology::grid && j + 1 < ny_) out.emplace_back(node(i, j), node(i, j + 1));
      }
    return out;
  }

  /// Grid boundary (chain end points / outer ring) unless a mask was supplied.
  std::vector<bool> boundary() const {
    if (!boundary_.empty()) return boundary_;
    std::vector<bool> b(static_cast<std::size_t>(nodes()), false);
    for (Index j = 0; j < ny_; ++j)
      for (Index i = 0; i < nx_; ++i) {
        const bool edge = i == 0 || i == nx_ - 1 || (topology_ == Topology::grid && (j == 0 || j == ny_ - 1));
        b[static_cast<std::size_t>(node(i, j))] = edge;
      }
    return b;
  }

  /// Subdomain mask; defaults to all non-boundary nodes.
  std::vector<bool> subdomain() const {
    if (!subdomain_.empty()) return subdomain_;
    std::vector<bool> s = boundary();
    s.flip();
    return s;
  }

  GridSpec& set_boundary(std::vector<bool> mask) {
    require(static_cast<Index>(mask.size()) == nodes(), "GridSpec: boundary mask has wrong size");
    boundary_ = std::move(mask);
    return *this;
  }
  GridSpec& set_subdomain(std::vector<bool> mask) {
    require(static_cast<Index>(mask.size()) == nodes(), "GridSpec: subdomain mask has wrong size");
    subdomain_ = std::move(mask);
    return *this;
  }
  /// Subdomain from an index box [lo, hi] (inclusive; j ignored on chains).
  GridSpec& set_subdomain_box(Index i0, Index i1, Index j0 = 0, Index j1 = 0) {
    std::vector<bool> m(static_cast<std::size_t>(nodes()), false);
    for (Index j = j0; j <= j1; ++j)
      for (Index i = i0; i <= i1; ++i) {
        require(i >= 0 && i < nx_ && j >= 0 && j < ny_, "GridSpec: subdomain box out of range");
        m[static_cast<std::size_t>(node(i, j))] = true;
      }
    return set_subdomain(std::move(m));
  }

 private:
  Topology topology_ = Topology::chain;
  Index nx_ = 0, ny_ = 1;
  double h_ = 1.0;
  std::vector<bool> boundary_, subdomain_;
};

/// Nonlinearities g (interior reaction) and beta (boundary law), with primitives G and B.
struct ScalarLaw {
  enum class GKind { zero, linear, sine, tanh };
  enum class BetaKind { zero, linear, power };

  GKind g = GKind::zero;
  std::vector<double> g_params;
  double lipschitz = 0.0;  // declared Lipschitz constant of g
  BetaKind beta = BetaKind::zero;
  std::vector<double> beta_params;

  static ScalarLaw none() { return {}; }

  double param(const std::vector<double>& p, std::size_t k, double fallback) const {
    return k < p.size() ? p[k] : fallback;
  }

  /// g nondecreasing, hence G convex.
  bool g_monotone() const {
    switch (g) {
      case GKind::zero: return true;
      case GKind::linear: return param(g_params, 0, 1.0) >= 0.0;
      case GKind::tanh: return param(g_params, 0, 1.0) >= 0.0;
      case GKind::sine: return false;
    }
    return false;
  }
  bool g_vanishes_at_zero() const { return g != GKind::linear || param(g_params, 1, 0.0) == 0.0; }

  /// G(s) = int_0^s g; linear: a s + c, sine: a sin(k s), tanh: a tanh(s).
  ScalarPrimitive G() const {
    ScalarPrimitive P;
    P.convex = g_monotone();
    switch (g) {
      case GKind::zero:
        P.value = [](double) { return 0.0; };
        P.derivative = [](double) { return 0.0; };
        P.lipschitz = 0.0;
        break;
      case GKind::linear: {
        const double a = param(g_params, 0, 1.0), c = param(g_params, 1, 0.0);
        P.value = [a, c](double s) { return 0.5 * a * s * s + c * s; };
        P.derivative = [a, c](double s) { return a * s + c; };
        P.lipschitz = std::abs(a);
        break;
      }
      case GKind::sine: {
        const double a = param(g_params, 0, 1.0), k = param(g_params, 1, 1.0);
        require(k != 0.0, "ScalarLaw: sine frequency must be nonzero");
        P.value = [a, k](double s) { return a * (1.0 - std::cos(k * s)) / k; };
        P.derivative = [a, k](double s) { return a * std::sin(k * s); };
        P.lipschitz = std::abs(a * k);
        break;
      }
      case GKind::tanh: {
        const double a = param(g_params, 0, 1.0);
        P.value = [a](double s) {
          const double t = std::abs(s);
          return a * (t + std::log1p(std::exp(-2.0 * t)) - std::log(2.0));
        };
        P.derivative = [a](double s) { return a * std::tanh(s); };
        P.lipschitz = std::abs(a);
        break;
      }
    }
    P.lipschitz = std::max(P.lipschitz, lipschitz);
    return P;
  }

  /// B(s) = int_0^s beta; linear: b s, power: b |s|^(r-2) s.
  ScalarPrimitive B() const {
    ScalarPrimitive P;
    P.convex = true;
    switch (beta) {
      case BetaKind::zero:
        P.value = [](double) { return 0.0; };
        P.derivative = [](double) { return 0.0; };
        break;
      case BetaKind::linear: {
        const double b = param(beta_params, 0, 1.0);
        require(b >= 0.0, "ScalarLaw: beta must be nondecreasing");
        P.value = [b](double s) { return 0.5 * b * s * s; };
        P.derivative = [b](double s) { return b * s; };
        P.lipschitz = b;
        break;
      }
      case BetaKind::power: {
        const double b = param(beta_params, 0, 1.0), r = param(beta_params, 1, 2.0);
        require(b >= 0.0 && r > 1.0, "ScalarLaw: power beta needs b >= 0 and r > 1");
        P.value = [b, r](double s) { return b * std::pow(std::abs(s), r) / r; };
        P.derivative = [b, r](double s) { return b * std::pow(std::abs(s), r - 1.0) * ((s > 0) - (s < 0)); };
        P.lipschitz = 0.0;
        break;
      }
    }
    return P;
  }

  bool has_beta() const { return beta != BetaKind::zero; }
  bool has_g() const { return g != GKind::zero; }
};

namespace detail {

inline std::vector<Index> nodes_where(const std::vector<bool>& mask, bool value = true) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == value) out.push_back(static_cast<Index>(i));
  return out;
}

/// Edges over the node subset `keep` (renumbered); neighbours outside `keep` become ground edges
/// when `ground_outside` is set and are dropped otherwise.
inline std::vector<Edge> edges_on(const GridSpec& grid, const std::vector<Index>& keep, double weight,
                                  bool ground_outside) {
  std::vector<Index> local(static_cast<std::size_t>(grid.nodes()), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) local[static_cast<std::size_t>(keep[k])] = static_cast<Index>(k);
  std::vector<Edge> edges;
  for (auto [a, b] : grid.neighbours()) {
    const Index la = local[static_cast<std::size_t>(a)], lb = local[static_cast<std::size_t>(b)];
    if (la >= 0 && lb >= 0) edges.push_back({la, lb, weight});
    else if (ground_outside && la >= 0) edges.push_back({la, kGround, weight});
    else if (ground_outside && lb >= 0) edges.push_back({lb, kGround, weight});
  }
  return edges;
}

inline std::vector<Index> positions_of(const std::vector<Index>& subset, const std::vector<Index>& within) {
  std::vector<Index> local(subset.size());
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto it = std::find(within.begin(), within.end(), subset[k]);
    require(it != within.end(), "problems: node subset is not contained in the unknowns");
    local[k] = static_cast<Index>(it - within.begin());
  }
  return local;
}

inline double shift_for(const ScalarLaw& law) { return law.g_monotone() ? 0.0 : law.G().lipschitz + 1e-6; }

inline void add_edges(ExtendedFunctional& E, std::vector<Edge> edges, double p) {
  if (!edges.empty()) E.add(EnergyTerm(PEdgeEnergy{std::move(edges), p}, "p-edge"));
}

inline void add_nodewise(ExtendedFunctional& E, const std::vector<Index>& nodes, double weight,
                         const ScalarPrimitive& P, const std::string& label) {
  if (nodes.empty()) return;
  E.add(EnergyTerm(NodewiseIntegral{nodes, Vector::Constant(static_cast<Index>(nodes.size()), weight), P}, label));
}

}  // namespace detail

/// Robin problem: V = all nodes, H = L2(interior), j = restriction to the interior.
inline JEllipticPair build_robin(const GridSpec& grid, double p, const ScalarLaw& law,
                                 std::optional<double> omega = std::nullopt) {
  require(p > 1.0, "build_robin: p must be > 1 (use build_tv for p = 1)");
  const int d = grid.dimension();
  const double h = grid.h();
  const std::vector<bool> bmask = grid.boundary();
  const auto interior = detail::nodes_where(bmask, false), boundary = detail::nodes_where(bmask, true);
  require(!interior.empty(), "build_robin: grid has no interior nodes");
  std::vector<Index> all(static_cast<std::size_t>(grid.nodes()));
  for (Index i = 0; i < grid.nodes(); ++i) all[static_cast<std::size_t>(i)] = i;

  ExtendedFunctional E(grid.nodes());
  detail::add_edges(E, detail::edges_on(grid, all, std::pow(h, d - p), false), p);
  if (law.has_g()) detail::add_nodewise(E, interior, std::pow(h, d), law.G(), "G");
  if (law.has_beta()) detail::add_nodewise(E, boundary, std::pow(h, d - 1), law.B(), "B");
  return JEllipticPair(std::move(E), JMap::restriction(grid.nodes(), interior),
                       WeightedSpace::uniform(static_cast<Index>(interior.size()), std::pow(h, d)),
                       omega.value_or(detail::shift_for(law)), "robin");
}

/// Dirichlet-to-Neumann problem: V = all nodes, H = L2(boundary), j = trace (non-injective).
inline JEllipticPair build_dtn(const GridSpec& grid, double p, const ScalarLaw& law,
                               std::optional<double> omega = std::nullopt) {
  require(p > 1.0, "build_dtn: p must be > 1");
  require(!law.has_beta(), "build_dtn: the Dirichlet-to-Neumann problem carries no boundary law");
  const int d = grid.dimension();
  const double h = grid.h();
  const std::vector<bool> bmask = grid.boundary();
  const auto interior = detail::nodes_where(bmask, false), boundary = detail::nodes_where(bmask, true);
  require(!boundary.empty(), "build_dtn: grid has an empty boundary");
  std::vector<Index> all(static_cast<std::size_t>(grid.nodes()));
  for (Index i = 0; i < grid.nodes(); ++i) all[static_cast<std::size_t>(i)] = i;

  ExtendedFunctional E(grid.nodes());
  detail::add_edges(E, detail::edges_on(grid, all, std::pow(h, d - p), false), p);
  if (law.has_g()) detail::add_nodewise(E, interior, std::pow(h, d), law.G(), "G");
  return JEllipticPair(std::move(E), JMap::restriction(grid.nodes(), boundary),
                       WeightedSpace::uniform(static_cast<Index>(boundary.size()), std::pow(h, d - 1)),
                       omega.value_or(detail::shift_for(law)), "dtn");
}

/// Coupled parabolic-elliptic system: V = interior of the big domain (zero outer boundary),
/// H = L2(subdomain), j = restriction to the subdomain.
inline JEllipticPair build_coupled(const GridSpec& grid, double p) {
  require(p > 1.0, "build_coupled: p must be > 1");
  const int d = grid.dimension();
  const double h = grid.h();
  const std::vector<bool> bmask = grid.boundary(), omega_mask = grid.subdomain();
  const auto unknowns = detail::nodes_where(bmask, false);
  const auto inner_nodes = detail::nodes_where(omega_mask, true);
  require(!inner_nodes.empty(), "build_coupled: subdomain is empty");
  for (Index i : inner_nodes)
    require(!bmask[static_cast<std::size_t>(i)], "build_coupled: subdomain touches the outer boundary");

  ExtendedFunctional E(static_cast<Index>(unknowns.size()));
  detail::add_edges(E, detail::edges_on(grid, unknowns, std::pow(h, d - p), true), p);
  return JEllipticPair(std::move(E),
                       JMap::restriction(static_cast<Index>(unknowns.size()), detail::positions_of(inner_nodes, unknowns)),
                       WeightedSpace::uniform(static_cast<Index>(inner_nodes.size()), std::pow(h, d)), 0.0, "coupled");
}

/// Dirichlet p-Laplacian on the subdomain (default: all non-boundary nodes), zero outside.
inline JEllipticPair build_dirichlet(const GridSpec& grid, double p) {
  require(p > 1.0, "build_dirichlet: p must be > 1");
  const int d = grid.dimension();
  const double h = grid.h();
  const std::vector<bool> bmask = grid.boundary();
  const auto nodes = detail::nodes_where(grid.subdomain(), true);
  require(!nodes.empty(), "build_dirichlet: no unknowns");
  for (Index i : nodes) require(!bmask[static_cast<std::size_t>(i)], "build_dirichlet: subdomain contains boundary nodes");
  const auto n = static_cast<Index>(nodes.size());
  ExtendedFunctional E(n);
  detail::add_edges(E, detail::edges_on(grid, nodes, std::pow(h, d - p), true), p);
  return JEllipticPair(std::move(E), JMap::identity(n), WeightedSpace::uniform(n, std::pow(h, d)), 0.0, "dirichlet");
}

/// Neumann p-Laplacian on all nodes.
inline JEllipticPair build_neumann(const GridSpec& grid, double p) {
  require(p > 1.0, "build_neumann: p must be > 1");
  const int d = grid.dimension();
  const double h = grid.h();
  std::vector<Index> all(static_cast<std::size_t>(grid.nodes()));
  for (Index i = 0; i < grid.nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
  ExtendedFunctional E(grid.nodes());
  detail::add_edges(E, detail::edges_on(grid, all, std::pow(h, d - p), false), p);
  return JEllipticPair(std::move(E), JMap::identity(grid.nodes()),
                       WeightedSpace::uniform(grid.nodes(), std::pow(h, d)), 0.0, "neumann");
}

/// Anisotropic total variation on the interior of the big domain (zero outer boundary),
/// H = L2(subdomain), j = restriction.
inline JEllipticPair build_tv(const GridSpec& grid) {
  const int d = grid.dimension();
  const double h = grid.h();
  const std::vector<bool> bmask = grid.boundary();
  const auto unknowns = detail::nodes_where(bmask, false);
  const auto inner_nodes = detail::nodes_where(grid.subdomain(), true);
  require(!unknowns.empty() && !inner_nodes.empty(), "build_tv: empty node set");
  ExtendedFunctional E(static_cast<Index>(unknowns.size()));
  E.add(EnergyTerm(TotalVariation{detail::edges_on(grid, unknowns, std::pow(h, d - 1), true)}, "tv"));
  return JEllipticPair(std::move(E),
                       JMap::restriction(static_cast<Index>(unknowns.size()), detail::positions_of(inner_nodes, unknowns)),
                       WeightedSpace::uniform(static_cast<Index>(inner_nodes.size()), std::pow(h, d)), 0.0, "tv");
}

/// E(x) = (1/2) x^T Q x on H = R^n with the given weights and j = identity.
inline JEllipticPair build_quadratic(const Matrix& Q, const Vector& weights) {
  require(Q.rows() == Q.cols() && Q.rows() == weights.size(), "build_quadratic: shape mismatch");
  const Matrix S = 0.5 * (Q + Q.transpose());
  ExtendedFunctional E(Q.rows());
  E.add(EnergyTerm(QuadraticForm{S}, "quadratic"));
  const WeightedSpace H(weights);
  const JMap j = JMap::identity(Q.rows());
  const double omega = required_shift(E.concavity(), j, H);
  require(std::isfinite(omega), "build_quadratic: energy is not j-semiconvex");
  return JEllipticPair(std::move(E), j, H, omega > 0.0 ? omega + 1e-6 : 0.0, "quadratic");
}

}  // namespace jflow
