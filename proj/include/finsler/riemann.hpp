#pragma once

/**
 * @file riemann.hpp
 * @brief Christoffel symbols of alpha and the covariant-derivative decomposition of beta.
 *
 * Notation: b_{i|j} = d_j b_i - gamma^k_ij b_k, r_ij / s_ij its symmetric / antisymmetric
 * parts, r_i = b^j r_ji, s_i = b^j s_ji, r = b^i r_i, indices raised with a^{ij}.
 */

#include "finsler/errors.hpp"
#include "finsler/fields.hpp"
#include "finsler/jets.hpp"
#include "finsler/linalg.hpp"

#include <span>
#include <vector>

namespace finsler {

inline constexpr double kBetaNormFloor = 1e-10;

struct ChristoffelData
{
  int n = 0;
  std::vector<double> gamma;  // gamma^i_jk at [(i * n + j) * n + k]

  double operator()(int i, int j, int k) const { return gamma[static_cast<std::size_t>((i * n + j) * n + k)]; }

  /// alpha-spray 1/2 gamma^i_jk y^j y^k, for doubles or jets.
  template <class T>
  std::vector<T> alpha_spray(std::span<const T> y) const
  {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      T acc = y[0] * 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) acc += y[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(k)] * (0.5 * (*this)(i, j, k));
      out.push_back(acc);
    }
    return out;
  }
};

/// a_ij and its first partials at a point; a_ij must be positive definite there.
struct MetricSample
{
  MatrixXd a;
  std::vector<MatrixXd> da;  // da[k](i, j) = d_k a_ij
};

inline JetSpec first_order_spec(int n) { return {n, 1, 0}; }

inline MetricSample sample_metric(const MetricField& alpha, std::span<const double> x)
{
  const JetSpec spec = first_order_spec(alpha.n);
  const auto xs = seed_point(spec, VarKind::x, x);
  const JetMatrix a = alpha(xs);
  MetricSample out{a.values(), {}};
  for (int k = 0; k < alpha.n; ++k) out.da.push_back(a.partials(dx(k)));
  if (!is_positive_definite(out.a)) throw DomainError("metric '" + alpha.name + "'", out.a.determinant(), "a_ij is not positive definite");
  return out;
}

inline ChristoffelData christoffel(const MetricSample& m)
{
  const int n = static_cast<int>(m.a.rows());
  Eigen::FullPivLU<MatrixXd> lu(m.a);
  if (!lu.isInvertible()) throw SingularMatrix("a_ij is singular");
  const MatrixXd inv = lu.inverse();
  ChristoffelData c{n, std::vector<double>(static_cast<std::size_t>(n * n * n), 0.0)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l)
          acc += inv(i, l) * (m.da[static_cast<std::size_t>(j)](l, k) + m.da[static_cast<std::size_t>(k)](j, l) - m.da[static_cast<std::size_t>(l)](j, k));
        acc *= 0.5;
        c.gamma[static_cast<std::size_t>((i * n + j) * n + k)] = acc;
        c.gamma[static_cast<std::size_t>((i * n + k) * n + j)] = acc;
      }
  return c;
}

inline ChristoffelData christoffel(const MetricField& alpha, std::span<const double> x) { return christoffel(sample_metric(alpha, x)); }

struct BetaDerived
{
  int n = 0;
  double b2 = 0.0;
  MatrixXd a, a_inv;
  VectorXd b, b_up;
  MatrixXd b_cov;  // b_{i|j}
  MatrixXd r, s;   // r_ij, s_ij
  VectorXd r_i, s_i, r_up, s_up;
  double r_scalar = 0.0;
  ChristoffelData gamma;

  template <class T>
  T r00(std::span<const T> y) const { return quad(r, y); }

  template <class T>
  T r0(std::span<const T> y) const { return lin(r_i, y); }

  template <class T>
  T s0(std::span<const T> y) const { return lin(s_i, y); }

  template <class T>
  T beta(std::span<const T> y) const { return lin(b, y); }

  template <class T>
  T alpha_squared(std::span<const T> y) const { return quad(a, y); }

  /// s^i_0 = a^{ij} s_jk y^k
  template <class T>
  std::vector<T> s_up_0(std::span<const T> y) const
  {
    const MatrixXd m = a_inv * s;
    std::vector<T> out;
    for (int i = 0; i < n; ++i) {
      T acc = y[0] * 0.0;
      for (int k = 0; k < n; ++k) acc += y[static_cast<std::size_t>(k)] * m(i, k);
      out.push_back(acc);
    }
    return out;
  }

private:
  template <class T>
  T quad(const MatrixXd& m, std::span<const T> y) const
  {
    T acc = y[0] * 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * m(i, j);
    return acc;
  }

  template <class T>
  T lin(const VectorXd& v, std::span<const T> y) const
  {
    T acc = y[0] * 0.0;
    for (int i = 0; i < n; ++i) acc += y[static_cast<std::size_t>(i)] * v(i);
    return acc;
  }
};

/// All covariant-derivative quantities of beta with respect to alpha at x.
/// Throws SmallBetaNorm when b^2 < b2_floor.
inline BetaDerived beta_derived(const FieldPair& pair, std::span<const double> x, double b2_floor = kBetaNormFloor)
{
  pair.require_in_domain(x);
  const int n = pair.dimension();
  const JetSpec spec = first_order_spec(n);
  const auto xs = seed_point(spec, VarKind::x, x);
  const JetMatrix aj = pair.alpha(xs);
  const std::vector<JetValue> bj = pair.beta(xs);

  MetricSample ms{aj.values(), {}};
  for (int k = 0; k < n; ++k) ms.da.push_back(aj.partials(dx(k)));
  if (!is_positive_definite(ms.a)) throw DomainError("metric '" + pair.alpha.name + "'", ms.a.determinant(), "a_ij is not positive definite");

  BetaDerived d;
  d.n = n;
  d.gamma = christoffel(ms);
  d.a = ms.a;
  d.a_inv = ms.a.inverse();
  d.b = VectorXd(n);
  for (int i = 0; i < n; ++i) d.b(i) = bj[static_cast<std::size_t>(i)].value();
  d.b_up = d.a_inv * d.b;
  d.b2 = d.b.dot(d.b_up);
  if (d.b2 < b2_floor) throw SmallBetaNorm(d.b2);

  d.b_cov = MatrixXd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = bj[static_cast<std::size_t>(i)].partial({dx(j)});
      for (int k = 0; k < n; ++k) acc -= d.gamma(k, i, j) * d.b(k);
      d.b_cov(i, j) = acc;
    }
  d.r = 0.5 * (d.b_cov + d.b_cov.transpose());
  d.s = 0.5 * (d.b_cov - d.b_cov.transpose());
  // r_i = b^j r_ji, s_i = b^j s_ji
  d.r_i = d.r.transpose() * d.b_up;
  d.s_i = d.s.transpose() * d.b_up;
  d.r_up = d.a_inv * d.r_i;
  d.s_up = d.a_inv * d.s_i;
  d.r_scalar = d.b_up.dot(d.r_i);
  return d;
}

/// s_ij - (1/b^2)(b_i s_j - b_j s_i), whose vanishing is invariant under beta-deformations.
inline MatrixXd s_condition_defect(const BetaDerived& d)
{
  return d.s - (d.b * d.s_i.transpose() - d.s_i * d.b.transpose()) / d.b2;
}

/// Residual scale for "residual <= tol" comparisons: tol * (||r_ij|| + 1).
inline double scaled_tolerance(const BetaDerived& d, double tol) { return tol * (d.r.norm() + 1.0); }

struct ConformalCheck
{
  double tau = 0.0;
  double residual_r = 0.0;
  double residual_s = 0.0;
  bool holds = false;
};

/// Fit r_ij = tau a_ij by least squares and measure the s_ij condition.
inline ConformalCheck check_conformal_condition(const BetaDerived& d, double tol = 1e-8)
{
  ConformalCheck c;
  c.tau = fit_symmetric(d.r, {d.a}, &c.residual_r)(0);
  c.residual_s = s_condition_defect(d).norm();
  const double lim = scaled_tolerance(d, tol);
  c.holds = c.residual_r <= lim && c.residual_s <= lim;
  return c;
}

inline ConformalCheck check_conformal_condition(const FieldPair& pair, std::span<const double> x, double tol = 1e-8)
{
  return check_conformal_condition(beta_derived(pair, x), tol);
}

/// Fit r_ij = tau (b^2 a_ij - b_i b_j) and measure the s_ij condition.
inline ConformalCheck check_degenerate_conformal_condition(const BetaDerived& d, double tol = 1e-8)
{
  ConformalCheck c;
  const MatrixXd basis = d.b2 * d.a - d.b * d.b.transpose();
  c.tau = fit_symmetric(d.r, {basis}, &c.residual_r)(0);
  c.residual_s = s_condition_defect(d).norm();
  const double lim = scaled_tolerance(d, tol);
  c.holds = c.residual_r <= lim && c.residual_s <= lim;
  return c;
}

inline ConformalCheck check_degenerate_conformal_condition(const FieldPair& pair, std::span<const double> x, double tol = 1e-8)
{
  return check_degenerate_conformal_condition(beta_derived(pair, x), tol);
}

}  // namespace finsler
