#pragma once

// The linear map j : V -> H with its fiber geometry.

#include "jflow/common.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace jflow {

class JMap {
 public:
  JMap() = default;

  /// Everywhere defined j given by an m x n matrix.
  explicit JMap(Matrix matrix) : matrix_(std::move(matrix)) { detect_selection(); }

  /// j defined on span(domain_basis) only (a partially defined operator).
  JMap(Matrix matrix, Matrix domain_basis) : matrix_(std::move(matrix)), domain_(std::move(domain_basis)) {
    require(domain_->rows() == matrix_.cols(), "JMap: domain basis has wrong ambient dimension");
    detect_selection();
  }

  static JMap identity(Index n) { return JMap(Matrix::Identity(n, n)); }

  /// Restriction to the listed coordinates, in the listed order.
  static JMap restriction(Index n, const std::vector<Index>& nodes) {
    Matrix m = Matrix::Zero(static_cast<Index>(nodes.size()), n);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      require(nodes[k] >= 0 && nodes[k] < n, "JMap::restriction: node index out of range");
      m(static_cast<Index>(k), nodes[k]) = 1.0;
    }
    return JMap(std::move(m));
  }

  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }
  const Matrix& matrix() const { return matrix_; }
  bool everywhere_defined() const { return !domain_.has_value(); }
  const std::optional<Matrix>& domain() const { return domain_; }

  /// Non-empty when j is a coordinate restriction: selection()[k] is the V-index of H-node k.
  const std::vector<Index>& selection() const { return selection_; }
  bool is_selection() const { return !selection_.empty() || rows() == 0; }

  Vector apply(const Vector& v) const {
    require(v.size() == cols(), "JMap::apply: dimension mismatch");
    if (is_selection()) {
      Vector out(rows());
      for (Index k = 0; k < rows(); ++k) out[k] = v[selection_[static_cast<std::size_t>(k)]];
      return out;
    }
    return matrix_ * v;
  }
  Vector operator()(const Vector& v) const { return apply(v); }

  Vector apply_transpose(const Vector& h) const {
    require(h.size() == rows(), "JMap::apply_transpose: dimension mismatch");
    if (is_selection()) {
      Vector out = Vector::Zero(cols());
      for (Index k = 0; k < rows(); ++k) out[selection_[static_cast<std::size_t>(k)]] += h[k];
      return out;
    }
    return matrix_.transpose() * h;
  }

  Index rank() const {
    if (is_selection()) return rows();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(matrix_);
    cod.setThreshold(1e-12);
    return cod.rank();
  }

 private:
  void detect_selection() {
    selection_.clear();
    std::vector<bool> used(static_cast<std::size_t>(cols()), false);
    std::vector<Index> sel;
    for (Index r = 0; r < rows(); ++r) {
      Index hit = -1;
      for (Index c = 0; c < cols(); ++c) {
        const double x = matrix_(r, c);
        if (x == 0.0) continue;
        if (x != 1.0 || hit >= 0) return;
        hit = c;
      }
      if (hit < 0 || used[static_cast<std::size_t>(hit)]) return;
      used[static_cast<std::size_t>(hit)] = true;
      sel.push_back(hit);
    }
    selection_ = std::move(sel);
  }

  Matrix matrix_;
  std::optional<Matrix> domain_;
  std::vector<Index> selection_;
};

/// Orthonormal basis (columns) of ker j.
inline Matrix kernel_basis(const JMap& j) {
  const Index n = j.cols();
  if (j.is_selection()) {
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Index v : j.selection()) used[static_cast<std::size_t>(v)] = true;
    const Index k = n - static_cast<Index>(j.selection().size());
    Matrix z = Matrix::Zero(n, k);
    Index col = 0;
    for (Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) z(i, col++) = 1.0;
    return z;
  }
  if (j.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(j.matrix(), Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-12 * std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  Index r = 0;
  while (r < s.size() && s[r] > cutoff) ++r;
  return svd.matrixV().rightCols(n - r);
}

/// Least-squares (minimum norm) preimage j^+ u.
inline Vector particular_preimage(const JMap& j, const Vector& u) {
  require(u.size() == j.rows(), "particular_preimage: dimension mismatch");
  if (j.is_selection()) return j.apply_transpose(u);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(j.matrix());
  cod.setThreshold(1e-12);
  return cod.solve(u);
}

}  // namespace jflow
