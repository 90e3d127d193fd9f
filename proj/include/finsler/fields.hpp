#pragma once

/**
 * @file fields.hpp
 * @brief Riemannian metrics a_ij(x), 1-forms b_i(x), scalar factors of b^2, and the example catalog.
 *
 * Fields are evaluated on x-jets so derivatives propagate exactly through any
 * later deformation. All field objects are immutable after construction.
 */

#include "finsler/errors.hpp"
#include "finsler/jets.hpp"
#include "finsler/linalg.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace finsler {

using DomainPredicate = std::function<bool(std::span<const double>)>;

struct MetricField
{
  int n = 2;
  std::function<JetMatrix(std::span<const JetValue>)> eval;
  std::string name;

  JetMatrix operator()(std::span<const JetValue> x) const { return eval(x); }
};

struct OneFormField
{
  int n = 2;
  std::function<std::vector<JetValue>(std::span<const JetValue>)> eval;
  std::string name;

  std::vector<JetValue> operator()(std::span<const JetValue> x) const { return eval(x); }
};

/// A function of one variable t = b^2, evaluated on jets so it composes with
/// field evaluation to any order. Factors carry their derivatives analytically;
/// there is no numeric differentiation path.
struct ScalarFactor
{
  std::string name;
  std::function<JetValue(const JetValue&)> eval;

  JetValue operator()(const JetValue& t) const { return eval(t); }

  /// (f(t), f'(t)) at a real argument.
  std::pair<double, double> value_and_derivative(double t) const
  {
    const JetSpec spec{2, 1, 0};
    const JetValue r = eval(JetValue::variable(spec, dx(0), t));
    return {r.value(), r.partial({dx(0)})};
  }

  double value(double t) const { return eval(JetValue::constant(JetSpec{2, 0, 0}, t)).value(); }

  static ScalarFactor constant(double c)
  {
    return {"const(" + std::to_string(c) + ")", [c](const JetValue& t) { return JetValue::constant(t.spec(), c); }};
  }

  /// sum_k coeffs[k] t^k
  static ScalarFactor polynomial(std::vector<double> coeffs, std::string label = "poly")
  {
    return {std::move(label), [coeffs = std::move(coeffs)](const JetValue& t) {
              JetValue acc = JetValue::constant(t.spec(), 0.0);
              for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
              return acc;
            }};
  }
};

struct FieldPair
{
  MetricField alpha;
  OneFormField beta;
  DomainPredicate domain;
  std::string name;

  int dimension() const noexcept { return alpha.n; }

  bool contains(std::span<const double> x) const { return !domain || domain(x); }

  void require_in_domain(std::span<const double> x) const
  {
    if (!contains(x)) throw DomainError("FieldPair '" + name + "'", x.empty() ? 0.0 : x[0], "point outside the domain of validity");
  }
};

/// Values and first x-derivatives of a pair at one point.
struct PairSample
{
  JetMatrix a;
  std::vector<JetValue> b;
};

inline PairSample evaluate_pair(const FieldPair& pair, std::span<const JetValue> x)
{
  return {pair.alpha(x), pair.beta(x)};
}

/// b^2 = a^{ij} b_i b_j as a jet.
inline JetValue beta_norm_squared(const JetMatrix& a, std::span<const JetValue> b)
{
  const JetMatrix inv = inverse(a);
  return bilinear(inv, b, b);
}

/// A Finsler function given directly as F(x, y) on jets (bypasses the (alpha, beta) form).
struct ClosedFormMetric
{
  int n = 2;
  std::function<JetValue(std::span<const JetValue>, std::span<const JetValue>)> eval;
  DomainPredicate domain;
  std::string name;
};

namespace detail {

inline JetValue squared_norm(std::span<const JetValue> x)
{
  JetValue acc = JetValue::constant(x[0].spec(), 0.0);
  for (const auto& xi : x) acc += xi * xi;
  return acc;
}

inline double squared_norm(std::span<const double> x)
{
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

inline JetMatrix identity(int n, const JetSpec& spec)
{
  JetMatrix m(n, spec);
  for (int i = 0; i < n; ++i) m(i, i) = JetValue::constant(spec, 1.0);
  return m;
}

inline void require_dimension(std::span<const JetValue> x, int n, const char* who)
{
  if (static_cast<int>(x.size()) != n) throw DomainError(who, static_cast<double>(x.size()), "point dimension mismatch");
}

// e^{2 rho} (delta_ij - kappa v_i v_j)
inline JetMatrix deformed_flat(std::span<const JetValue> v, const JetValue& kappa, const JetValue& rho)
{
  const int n = static_cast<int>(v.size());
  const JetSpec spec = v[0].spec();
  const JetValue e2r = exp(rho * 2.0);
  JetMatrix m(n, spec);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      JetValue e = -(kappa * v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)]);
      if (i == j) e += 1.0;
      m(i, j) = e2r * e;
    }
  return m;
}

inline bool kappa_admissible(const ScalarFactor& kappa, double t) { return 1.0 - kappa.value(t) * t > 0.0; }

}  // namespace detail

/// alpha = |y|, beta = <x, y>. Closed and conformal: r_ij = delta_ij, s_ij = 0.
inline FieldPair catalog_flat_conformal(int n)
{
  if (n < 2) throw DomainError("catalog_flat_conformal", n, "dimension must be at least 2");
  MetricField alpha{n, [n](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "flat_conformal");
                      return detail::identity(n, x[0].spec());
                    },
                    "euclidean"};
  OneFormField beta{n, [n](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "flat_conformal");
                      return std::vector<JetValue>(x.begin(), x.end());
                    },
                    "<x,y>"};
  return {alpha, beta, [](std::span<const double> x) { return detail::squared_norm(x) > 0.0; }, "flat_conformal"};
}

/// Negative control: beta = <x, y> + eps (x^1)^2 y^2. Not conformal, not Douglas.
inline FieldPair catalog_perturbed_conformal(int n, double eps = 0.1)
{
  FieldPair p = catalog_flat_conformal(n);
  p.beta.eval = [n, eps](std::span<const JetValue> x) {
    detail::require_dimension(x, n, "perturbed_conformal");
    std::vector<JetValue> b(x.begin(), x.end());
    b[1] += x[0] * x[0] * eps;
    return b;
  };
  p.beta.name = "<x,y> + eps (x^1)^2 y^2";
  p.name = "perturbed_conformal";
  return p;
}

/// alpha = |y|, beta = x^2 y^1 - x^1 y^2 on the punctured plane. Killing, not closed.
inline FieldPair catalog_rotational_killing()
{
  MetricField alpha{2, [](std::span<const JetValue> x) {
                      detail::require_dimension(x, 2, "rotational_killing");
                      return detail::identity(2, x[0].spec());
                    },
                    "euclidean"};
  OneFormField beta{2, [](std::span<const JetValue> x) {
                      detail::require_dimension(x, 2, "rotational_killing");
                      return std::vector<JetValue>{x[1], -x[0]};
                    },
                    "x^2 y^1 - x^1 y^2"};
  return {alpha, beta, [](std::span<const double> x) { return detail::squared_norm(x) > 0.0; }, "rotational_killing"};
}

/// kappa(t) = mu / (1 + mu t)
inline ScalarFactor mu_kappa(double mu)
{
  return {"mu/(1+mu t)", [mu](const JetValue& t) { return mu / (t * mu + 1.0); }};
}

/// Closed conformal family: alpha-bar = e^rho sqrt(|y|^2 - kappa <x,y>^2),
/// beta-bar = C sqrt(1 - kappa <x,x>) e^{2 rho} <x,y>, with kappa, rho functions of <x,x>.
inline FieldPair catalog_example_71(double C, ScalarFactor kappa, ScalarFactor rho, int n = 3)
{
  if (C == 0.0) throw DomainError("catalog_example_71", C, "C must be nonzero");
  auto k = std::make_shared<const ScalarFactor>(std::move(kappa));
  auto r = std::make_shared<const ScalarFactor>(std::move(rho));
  MetricField alpha{n, [n, k, r](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "example_71");
                      const JetValue t = detail::squared_norm(x);
                      return detail::deformed_flat(x, (*k)(t), (*r)(t));
                    },
                    "example_71.alpha"};
  OneFormField beta{n, [n, k, r, C](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "example_71");
                      const JetValue t = detail::squared_norm(x);
                      const JetValue q = 1.0 - (*k)(t) * t;
                      if (!(q.value() > 0.0)) throw DomainError("example_71: 1 - kappa b^2", q.value());
                      const JetValue scale = sqrt(q) * exp((*r)(t) * 2.0) * C;
                      std::vector<JetValue> b;
                      for (const auto& xi : x) b.push_back(scale * xi);
                      return b;
                    },
                    "example_71.beta"};
  return {alpha, beta,
          [k](std::span<const double> x) {
            const double t = detail::squared_norm(x);
            return t > 0.0 && detail::kappa_admissible(*k, t);
          },
          "example_71"};
}

/// The mu-family: C = 1, rho = 0, kappa = mu/(1 + mu <x,x>).
inline FieldPair catalog_example_71(double mu, int n = 3) { return catalog_example_71(1.0, mu_kappa(mu), ScalarFactor::constant(0.0), n); }

/// Constant-length family: alpha-bar = e^rho sqrt(|y|^2 - kappa <x,y>^2),
/// beta-bar = C sqrt(1 - kappa <x,x>) e^rho <x,y>/|x|, so b-bar^2 = C^2. The pair is
/// returned in the singular-square representation alpha = b-bar^{-3} alpha-bar,
/// beta = b-bar^{-3} beta-bar, for which (b alpha + beta)^2/alpha is the Douglas metric.
inline FieldPair catalog_example_72(double C, ScalarFactor kappa, ScalarFactor rho, int n = 3)
{
  if (C == 0.0) throw DomainError("catalog_example_72", C, "C must be nonzero");
  auto k = std::make_shared<const ScalarFactor>(std::move(kappa));
  auto r = std::make_shared<const ScalarFactor>(std::move(rho));
  const double bbar3 = std::pow(std::abs(C), 3.0);
  MetricField alpha{n, [n, k, r, bbar3](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "example_72");
                      const JetValue t = detail::squared_norm(x);
                      JetMatrix a = detail::deformed_flat(x, (*k)(t), (*r)(t));
                      for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) a(i, j) /= bbar3 * bbar3;
                      return a;
                    },
                    "example_72.alpha"};
  OneFormField beta{n, [n, k, r, C, bbar3](std::span<const JetValue> x) {
                      detail::require_dimension(x, n, "example_72");
                      const JetValue t = detail::squared_norm(x);
                      const JetValue q = 1.0 - (*k)(t) * t;
                      if (!(q.value() > 0.0)) throw DomainError("example_72: 1 - kappa b^2", q.value());
                      const JetValue scale = sqrt(q) * exp((*r)(t)) / sqrt(t) * (C / bbar3);
                      std::vector<JetValue> b;
                      for (const auto& xi : x) b.push_back(scale * xi);
                      return b;
                    },
                    "example_72.beta"};
  return {alpha, beta,
          [k](std::span<const double> x) {
            const double t = detail::squared_norm(x);
            return t > 0.0 && detail::kappa_admissible(*k, t);
          },
          "example_72"};
}

inline FieldPair catalog_example_72(double mu, int n = 3) { return catalog_example_72(1.0, mu_kappa(mu), ScalarFactor::constant(0.0), n); }

/// Killing family in the plane: alpha-bar = e^rho sqrt(|y|^2 - kappa beta0^2),
/// beta-bar = C (1 - kappa t) e^{2 rho} beta0 with beta0 = x^2 y^1 - x^1 y^2, t = |x|^2.
/// Returned in the singular-square representation (b-bar^{-3} alpha-bar, b-bar^{-3} beta-bar).
inline FieldPair catalog_example_73(ScalarFactor kappa, ScalarFactor rho, double C = 1.0)
{
  if (C == 0.0) throw DomainError("catalog_example_73", C, "C must be nonzero");
  auto k = std::make_shared<const ScalarFactor>(std::move(kappa));
  auto r = std::make_shared<const ScalarFactor>(std::move(rho));
  // b-bar^2 = C^2 (1 - kappa t) e^{2 rho} t
  auto parts = [k, r, C](std::span<const JetValue> x) {
    detail::require_dimension(x, 2, "example_73");
    const JetValue t = detail::squared_norm(x);
    const JetValue kap = (*k)(t);
    const JetValue rh = (*r)(t);
    const JetValue q = 1.0 - kap * t;
    if (!(q.value() > 0.0)) throw DomainError("example_73: 1 - kappa b^2", q.value());
    const JetValue bbar2 = q * exp(rh * 2.0) * t * (C * C);
    return std::tuple{kap, rh, q, bbar2};
  };
  MetricField alpha{2, [parts](std::span<const JetValue> x) {
                      const auto [kap, rh, q, bbar2] = parts(x);
                      const std::vector<JetValue> b0{x[1], -x[0]};
                      JetMatrix a = detail::deformed_flat(b0, kap, rh);
                      const JetValue inv6 = reciprocal(bbar2 * bbar2 * bbar2);
                      for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j) a(i, j) = a(i, j) * inv6;
                      return a;
                    },
                    "example_73.alpha"};
  OneFormField beta{2, [parts, C](std::span<const JetValue> x) {
                      const auto [kap, rh, q, bbar2] = parts(x);
                      const JetValue scale = q * exp(rh * 2.0) * C / pow(bbar2, 3, 2);
                      return std::vector<JetValue>{scale * x[1], -(scale * x[0])};
                    },
                    "example_73.beta"};
  return {alpha, beta,
          [k](std::span<const double> x) {
            const double t = detail::squared_norm(x);
            return t > 0.0 && detail::kappa_admissible(*k, t);
          },
          "example_73"};
}

/// Berwald's projectively flat metric on the unit ball, as a closed form.
inline ClosedFormMetric catalog_berwald(int n)
{
  if (n < 2) throw DomainError("catalog_berwald", n, "dimension must be at least 2");
  return {n,
          [n](std::span<const JetValue> x, std::span<const JetValue> y) {
            detail::require_dimension(x, n, "berwald");
            const JetValue xx = detail::squared_norm(x);
            if (!(xx.value() < 1.0)) throw DomainError("berwald: |x|^2", xx.value(), "point outside the unit ball");
            const JetValue yy = detail::squared_norm(y);
            const JetValue xy = dot(x, y);
            const JetValue q = 1.0 - xx;
            const JetValue root = sqrt(q * yy + xy * xy);
            const JetValue num = root + xy;
            return num * num / (q * q * root);
          },
          [](std::span<const double> x) { return detail::squared_norm(x) < 1.0; }, "berwald"};
}

}  // namespace finsler
