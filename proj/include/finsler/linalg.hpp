#pragma once

#include "finsler/errors.hpp"
#include "finsler/jets.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace finsler {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense n x n matrix of jets, row-major.
class JetMatrix
{
public:
  JetMatrix() = default;
  JetMatrix(int n, const JetSpec& spec) : n_(n), data_(static_cast<std::size_t>(n * n), JetValue::constant(spec, 0.0)) {}

  int size() const noexcept { return n_; }
  JetValue& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * n_ + j)]; }
  const JetValue& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * n_ + j)]; }

  MatrixXd values() const
  {
    MatrixXd m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j).value();
    return m;
  }

  /// Partial derivative of every entry in one slot.
  MatrixXd partials(Var v) const
  {
    MatrixXd m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j).partial({v});
    return m;
  }

private:
  int n_ = 0;
  std::vector<JetValue> data_;
};

/// Gauss-Jordan inverse with partial pivoting on the base-point values.
inline JetMatrix inverse(const JetMatrix& m)
{
  const int n = m.size();
  const JetSpec spec = m(0, 0).spec();
  JetMatrix a = m;
  JetMatrix inv(n, spec);
  for (int i = 0; i < n; ++i) inv(i, i) = JetValue::constant(spec, 1.0);
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(m(i, j).value()));
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col).value()) > std::abs(a(piv, col).value())) piv = r;
    if (std::abs(a(piv, col).value()) <= 1e-14 * scale)
      throw SingularMatrix("matrix is singular to working precision");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const JetValue p = reciprocal(a(col, col));
    for (int j = 0; j < n; ++j) {
      a(col, j) = a(col, j) * p;
      inv(col, j) = inv(col, j) * p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const JetValue f = a(r, col);
      for (int j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

/// v^T M w
inline JetValue bilinear(const JetMatrix& m, std::span<const JetValue> v, std::span<const JetValue> w)
{
  JetValue acc = JetValue::constant(v[0].spec(), 0.0);
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) acc += m(i, j) * v[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)];
  return acc;
}

inline JetValue dot(std::span<const JetValue> v, std::span<const JetValue> w)
{
  JetValue acc = JetValue::constant(v[0].spec(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * w[i];
  return acc;
}

inline std::vector<JetValue> constant_vector(const JetSpec& spec, std::span<const double> v)
{
  std::vector<JetValue> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(JetValue::constant(spec, x));
  return out;
}

inline VectorXd to_eigen(std::span<const double> v)
{
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

inline std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline bool is_positive_definite(const MatrixXd& m)
{
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

/// Least-squares fit of a symmetric target by a linear combination of symmetric
/// basis matrices, using the n(n+1)/2 independent components (i <= j) as equations.
/// Returns the coefficients; `residual` receives the Frobenius norm of the misfit.
inline VectorXd fit_symmetric(const MatrixXd& target, const std::vector<MatrixXd>& basis, double* residual = nullptr)
{
  const auto n = target.rows();
  const auto rows = n * (n + 1) / 2;
  MatrixXd A(rows, static_cast<Eigen::Index>(basis.size()));
  VectorXd rhs(rows);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++row) {
      rhs(row) = target(i, j);
      for (std::size_t k = 0; k < basis.size(); ++k) A(row, static_cast<Eigen::Index>(k)) = basis[k](i, j);
    }
  // Normal equations are adequate at these sizes and keep the fit transparent.
  const MatrixXd normal = A.transpose() * A;
  const VectorXd coef = normal.completeOrthogonalDecomposition().solve(A.transpose() * rhs);
  if (residual) {
    MatrixXd misfit = target;
    for (std::size_t k = 0; k < basis.size(); ++k) misfit -= coef(static_cast<Eigen::Index>(k)) * basis[k];
    *residual = misfit.norm();
  }
  return coef;
}

}  // namespace finsler
