#pragma once

/**
 * @file deform.hpp
 * @brief beta-deformations alpha-bar = e^rho sqrt(alpha^2 - kappa beta^2), beta-bar = nu beta,
 * with kappa, rho, nu functions of t = b^2, and verifiers for their transformation laws.
 *
 * Deformed pairs are ordinary FieldPairs evaluated on x-jets, so every derivative of the
 * factors propagates exactly and deformed pairs can be deformed again.
 */

#include "finsler/douglas.hpp"
#include "finsler/errors.hpp"
#include "finsler/fields.hpp"
#include "finsler/jets.hpp"
#include "finsler/linalg.hpp"
#include "finsler/riemann.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace finsler {

struct DeformationFactors
{
  ScalarFactor kappa;
  ScalarFactor rho;
  ScalarFactor nu;
  std::string name;
};

inline DeformationFactors identity_factors()
{
  return {ScalarFactor::constant(0.0), ScalarFactor::constant(0.0), ScalarFactor::constant(1.0), "identity"};
}

struct DeformedPair
{
  FieldPair result;
  FieldPair source;
  DeformationFactors factors;
  std::vector<std::string> chain;  // factor names, oldest first
};

namespace detail {

struct DeformedData
{
  JetValue t, kappa, rho, nu;
  JetMatrix a;
  std::vector<JetValue> b;
};

inline DeformedData deformation_inputs(const FieldPair& src, const DeformationFactors& f, std::span<const JetValue> x)
{
  DeformedData d{{}, {}, {}, {}, src.alpha(x), src.beta(x)};
  d.t = beta_norm_squared(d.a, d.b);
  d.kappa = f.kappa(d.t);
  d.rho = f.rho(d.t);
  d.nu = f.nu(d.t);
  const double q = 1.0 - d.kappa.value() * d.t.value();
  if (!(q > 0.0)) throw DomainError("deformation '" + f.name + "': 1 - kappa b^2", q, "must be positive");
  if (d.nu.value() == 0.0) throw DomainError("deformation '" + f.name + "': nu", 0.0, "must be nonzero");
  return d;
}

}  // namespace detail

inline DeformedPair apply_deformation(const FieldPair& pair, const DeformationFactors& f)
{
  const int n = pair.dimension();
  auto src = std::make_shared<const FieldPair>(pair);
  auto fac = std::make_shared<const DeformationFactors>(f);
  MetricField alpha{n, [src, fac, n](std::span<const JetValue> x) {
                      const auto d = detail::deformation_inputs(*src, *fac, x);
                      const JetValue e2r = exp(d.rho * 2.0);
                      JetMatrix out(n, x[0].spec());
                      for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                          out(i, j) = e2r * (d.a(i, j) - d.kappa * d.b[static_cast<std::size_t>(i)] * d.b[static_cast<std::size_t>(j)]);
                      return out;
                    },
                    pair.alpha.name + "~" + f.name};
  OneFormField beta{n, [src, fac](std::span<const JetValue> x) {
                      const auto d = detail::deformation_inputs(*src, *fac, x);
                      std::vector<JetValue> out;
                      for (const auto& bi : d.b) out.push_back(d.nu * bi);
                      return out;
                    },
                    pair.beta.name + "~" + f.name};
  DomainPredicate domain = [src, fac, n](std::span<const double> x) {
    if (!src->contains(x)) return false;
    try {
      const JetSpec spec{n, 0, 0};
      const auto d = detail::deformation_inputs(*src, *fac, constant_vector(spec, x));
      return true;
    } catch (const DomainError&) {
      return false;
    } catch (const SmallBetaNorm&) {
      return false;
    }
  };
  DeformedPair out{{alpha, beta, domain, pair.name + "~" + f.name}, pair, f, {f.name}};
  return out;
}

inline DeformedPair apply_deformation(const DeformedPair& prev, const DeformationFactors& f)
{
  DeformedPair out = apply_deformation(prev.result, f);
  out.source = prev.source;
  out.chain = prev.chain;
  out.chain.push_back(f.name);
  return out;
}

/// b-bar^2 = e^{-2 rho} nu^2 t / (1 - kappa t) as a function of t.
inline ScalarFactor deformed_norm_map(const DeformationFactors& f)
{
  auto fac = std::make_shared<const DeformationFactors>(f);
  return {"bbar2[" + f.name + "]", [fac](const JetValue& t) {
            const JetValue nu = fac->nu(t);
            return exp(fac->rho(t) * -2.0) * nu * nu * t / (1.0 - fac->kappa(t) * t);
          }};
}

/// Single factor set equivalent to applying `first` and then `second`.
inline DeformationFactors compose(const DeformationFactors& first, const DeformationFactors& second)
{
  auto f = std::make_shared<const DeformationFactors>(first);
  auto g = std::make_shared<const DeformationFactors>(second);
  auto tbar = std::make_shared<const ScalarFactor>(deformed_norm_map(first));
  DeformationFactors out;
  out.name = first.name + ";" + second.name;
  out.kappa = {"kappa[" + out.name + "]", [f, g, tbar](const JetValue& t) {
                 const JetValue nu1 = f->nu(t);
                 return f->kappa(t) + g->kappa((*tbar)(t)) * nu1 * nu1 * exp(f->rho(t) * -2.0);
               }};
  out.rho = {"rho[" + out.name + "]", [f, g, tbar](const JetValue& t) { return f->rho(t) + g->rho((*tbar)(t)); }};
  out.nu = {"nu[" + out.name + "]", [f, g, tbar](const JetValue& t) { return f->nu(t) * g->nu((*tbar)(t)); }};
  return out;
}

// ---------------------------------------------------------------------------
// quadrature-backed factors

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth)
{
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-10, int max_depth = 48)
{
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Taylor coefficients f^(k)(t0)/k!, k = 0..order (order <= kMaxXOrder + kMaxYOrder).
/// Uses t = t0 + u + v on a two-group jet; the u^a v^b coefficient equals binom(k, a) f_k.
inline std::vector<double> taylor_coefficients(const ScalarFactor& f, double t0, int order)
{
  if (order > kMaxXOrder + kMaxYOrder) throw DomainError("taylor_coefficients", order, "order too high");
  const int xo = std::min(order, kMaxXOrder);
  const int yo = std::min(order, kMaxYOrder);
  const JetSpec spec{2, xo, yo};
  const JetValue t = JetValue::variable(spec, dx(0), t0) + JetValue::variable(spec, dy(0), 0.0);
  const JetValue r = f(t);
  std::vector<double> out(static_cast<std::size_t>(order + 1));
  double fact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) fact *= k;
    const int a = std::min(k, xo);
    std::vector<Var> slots(static_cast<std::size_t>(a), dx(0));
    slots.insert(slots.end(), static_cast<std::size_t>(k - a), dy(0));
    // partial = f^(k) for the mixed derivative of f(t0 + u + v)
    out[static_cast<std::size_t>(k)] = r.partial(slots) / fact;
  }
  return out;
}

/// Q(t) = integral of `integrand` from t0 to t: value by adaptive Simpson, higher
/// Taylor coefficients from the integrand's own jet.
inline ScalarFactor antiderivative(ScalarFactor integrand, double t0, std::string label, double tol = 1e-10)
{
  auto g = std::make_shared<const ScalarFactor>(std::move(integrand));
  return {std::move(label), [g, t0, tol](const JetValue& t) {
            const double tv = t.value();
            const int K = t.layout().max_degree();
            std::vector<double> taylor(static_cast<std::size_t>(K + 1), 0.0);
            taylor[0] = adaptive_simpson([&](double s) { return g->value(s); }, t0, tv, tol);
            if (K > 0) {
              const auto gk = taylor_coefficients(*g, tv, K - 1);
              for (int k = 1; k <= K; ++k) taylor[static_cast<std::size_t>(k)] = gk[static_cast<std::size_t>(k - 1)] / k;
            }
            return compose(t, taylor);
          }};
}

// ---------------------------------------------------------------------------
// named factor sets

/// kappa = 0, rho = ln t, nu = sqrt(t): b-bar = 1. No inverse is provided.
inline DeformationFactors unit_length_factors()
{
  return {ScalarFactor::constant(0.0), {"ln t", [](const JetValue& t) { return log(t); }},
          {"sqrt t", [](const JetValue& t) { return sqrt(t); }}, "unit_length"};
}

/// kappa = 0, rho = (1/3) integral d/(c + t d) dt from t0, nu = e^{rho/2}. Makes the d-term vanish.
inline DeformationFactors case1_factors(ScalarFactor c, ScalarFactor d, double t0)
{
  auto cp = std::make_shared<const ScalarFactor>(std::move(c));
  auto dp = std::make_shared<const ScalarFactor>(std::move(d));
  ScalarFactor integrand{"d/(3(c+td))", [cp, dp](const JetValue& t) {
                           const JetValue den = (*cp)(t) + t * (*dp)(t);
                           if (std::abs(den.value()) < 1e-14) throw PreconditionError("case-1 deformation requires c + b^2 d != 0");
                           return (*dp)(t) / (den * 3.0);
                         }};
  auto rho = std::make_shared<const ScalarFactor>(antiderivative(std::move(integrand), t0, "rho_case1"));
  return {ScalarFactor::constant(0.0), *rho, {"e^{rho/2}", [rho](const JetValue& t) { return exp((*rho)(t) * 0.5); }}, "case1"};
}

/// kappa = 1/t - C t exp(integral c/(t(c + t d)) dt), nu = D (1 - t kappa) e^{2 rho} / t^{3/2}:
/// beta-bar becomes conformal with respect to alpha-bar.
inline DeformationFactors conformal_factors(ScalarFactor c, ScalarFactor d, ScalarFactor rho, double C, double D, double t0)
{
  if (!(C > 0.0)) throw PreconditionError("conformal deformation requires C > 0");
  if (D == 0.0) throw PreconditionError("conformal deformation requires D != 0");
  auto cp = std::make_shared<const ScalarFactor>(std::move(c));
  auto dp = std::make_shared<const ScalarFactor>(std::move(d));
  auto rp = std::make_shared<const ScalarFactor>(std::move(rho));
  ScalarFactor integrand{"c/(t(c+td))", [cp, dp](const JetValue& t) {
                           const JetValue cv = (*cp)(t);
                           return cv / (t * (cv + t * (*dp)(t)));
                         }};
  auto I = std::make_shared<const ScalarFactor>(antiderivative(std::move(integrand), t0, "I"));
  auto kappa = std::make_shared<const ScalarFactor>(
      ScalarFactor{"kappa_conformal", [I, C](const JetValue& t) { return 1.0 / t - t * exp((*I)(t)) * C; }});
  ScalarFactor nu{"nu_conformal", [kappa, rp, D](const JetValue& t) {
                    return (1.0 - t * (*kappa)(t)) * exp((*rp)(t) * 2.0) * D / pow(t, 3, 2);
                  }};
  return {*kappa, *rp, nu, "conformal"};
}

/// alpha-bar = sqrt(alpha^2 - (t^-1 - t^2) beta^2), beta-bar = t^{3/2} beta. Leaves b^2 unchanged.
inline DeformationFactors prop51_factors()
{
  return {{"1/t - t^2", [](const JetValue& t) { return 1.0 / t - t * t; }}, ScalarFactor::constant(0.0),
          {"t^{3/2}", [](const JetValue& t) { return pow(t, 3, 2); }}, "prop51"};
}

inline DeformationFactors prop51_inverse_factors()
{
  return {{"1/t - 1/t^4", [](const JetValue& t) { return 1.0 / t - 1.0 / ipow(t, 4); }}, ScalarFactor::constant(0.0),
          {"t^{-3/2}", [](const JetValue& t) { return pow(t, -3, 2); }}, "prop51_inverse"};
}

/// alpha-bar = b^3 alpha, beta-bar = b^3 beta. Leaves b^2 unchanged.
inline DeformationFactors prop61_factors()
{
  return {ScalarFactor::constant(0.0), {"1.5 ln t", [](const JetValue& t) { return log(t) * 1.5; }},
          {"t^{3/2}", [](const JetValue& t) { return pow(t, 3, 2); }}, "prop61"};
}

inline DeformationFactors prop61_inverse_factors()
{
  return {ScalarFactor::constant(0.0), {"-1.5 ln t", [](const JetValue& t) { return log(t) * -1.5; }},
          {"t^{-3/2}", [](const JetValue& t) { return pow(t, -3, 2); }}, "prop61_inverse"};
}

/// nu = D t^{-3/2} (1 - t kappa) e^{2 rho}: removes the (b_i s_j + b_j s_i) term when c + b^2 d = 0.
inline DeformationFactors case2_factors(ScalarFactor kappa, ScalarFactor rho, double D)
{
  if (D == 0.0) throw PreconditionError("case-2 deformation requires D != 0");
  auto k = std::make_shared<const ScalarFactor>(kappa);
  auto r = std::make_shared<const ScalarFactor>(rho);
  return {kappa, rho, {"nu_case2", [k, r, D](const JetValue& t) { return (1.0 - t * (*k)(t)) * exp((*r)(t) * 2.0) * D / pow(t, 3, 2); }}, "case2"};
}

// ---------------------------------------------------------------------------
// verifiers

struct Prop41Check
{
  double r_residual = 0.0;  // ||r-bar(direct) - r-bar(formula)||
  double s_residual = 0.0;
  double r_scale = 0.0;     // ||r-bar||
  double s_scale = 0.0;
};

/// r-bar, s-bar of the deformed pair by direct covariant differentiation, compared with
/// the transformation formulas assembled from the source pair.
inline Prop41Check verify_prop_41(const FieldPair& pair, const DeformationFactors& f, std::span<const double> x)
{
  const BetaDerived s = beta_derived(pair, x);
  const BetaDerived d = beta_derived(apply_deformation(pair, f).result, x);
  const double t = s.b2;
  const auto [kap, dkap] = f.kappa.value_and_derivative(t);
  const auto [rho, drho] = f.rho.value_and_derivative(t);
  const auto [nu, dnu] = f.nu.value_and_derivative(t);
  (void)rho;
  const double q = 1.0 - kap * t;
  const MatrixXd bb = s.b * s.b.transpose();
  const MatrixXd bs = s.b * s.s_i.transpose() + s.s_i * s.b.transpose();
  const VectorXd rs = s.r_i + s.s_i;
  const MatrixXd brs = s.b * rs.transpose();
  const MatrixXd r_formula = nu / q * s.r + kap * nu / q * bs - dkap * nu / q * s.r_scalar * bb + 2.0 * drho * nu / q * s.r_scalar * (s.a - kap * bb) +
                             (dkap * nu * t / q - 2.0 * drho * nu + dnu) * (brs + brs.transpose());
  const MatrixXd s_formula = nu * s.s + dnu * (brs - brs.transpose());
  return {(d.r - r_formula).norm(), (d.s - s_formula).norm(), d.r.norm(), d.s.norm()};
}

struct LemmaInvCheck
{
  double residual = 0.0;  // ||lhs - rhs||
  double lhs_norm = 0.0;
  double rhs_norm = 0.0;
};

/// s-bar_ij - (1/b-bar^2)(b-bar_i s-bar_j - b-bar_j s-bar_i) = nu {s_ij - (1/b^2)(b_i s_j - b_j s_i)}
inline LemmaInvCheck verify_lemma_inv(const FieldPair& pair, const DeformationFactors& f, std::span<const double> x)
{
  const BetaDerived s = beta_derived(pair, x);
  const BetaDerived d = beta_derived(apply_deformation(pair, f).result, x);
  const MatrixXd lhs = s_condition_defect(d);
  const MatrixXd rhs = f.nu.value(s.b2) * s_condition_defect(s);
  return {(lhs - rhs).norm(), lhs.norm(), rhs.norm()};
}

/// b-bar^2 law: |b-bar^2(direct) - e^{-2 rho} nu^2 b^2 / (1 - kappa b^2)| / b-bar^2
inline double norm_law_residual(const FieldPair& pair, const DeformationFactors& f, std::span<const double> x)
{
  const BetaDerived s = beta_derived(pair, x);
  const BetaDerived d = beta_derived(apply_deformation(pair, f).result, x);
  const double predicted = deformed_norm_map(f).value(s.b2);
  return std::abs(d.b2 - predicted) / std::abs(predicted);
}

struct Lemma42Check
{
  double c = 0.0, d = 0.0;                 // source fit
  double cbar_fit = 0.0, dbar_fit = 0.0;   // fitted on the deformed pair
  double cbar = 0.0, dbar = 0.0;           // closed forms
  double residual = 0.0;                   // max of the two mismatches
  double source_sum = 0.0;                 // c + b^2 d
  double deformed_sum = 0.0;               // c-bar + b-bar^2 d-bar (fitted)
};

/// Deforms with kappa = 0, nu = e^{rho/2} and compares the fitted (c-bar, d-bar) with
/// c-bar = e^{-3rho/2}{(1 + 2t rho')c + 2t^2 rho' d}, d-bar = -e^{-rho/2}{3 rho' c - (1 - 3t rho')d}.
inline Lemma42Check verify_lemma_42(const FieldPair& pair, const ScalarFactor& rho, std::span<const double> x, double tol = 1e-8)
{
  auto r = std::make_shared<const ScalarFactor>(rho);
  const DeformationFactors f{ScalarFactor::constant(0.0), rho, {"e^{rho/2}", [r](const JetValue& t) { return exp((*r)(t) * 0.5); }}, "lemma42"};
  const BetaDerived s = beta_derived(pair, x);
  const DouglasReport src = check_characterization(s, tol);
  if (src.r_residual > src.tolerance) throw PreconditionError("verify_lemma_42: the source pair does not satisfy the r_ij condition");
  const BetaDerived dd = beta_derived(apply_deformation(pair, f).result, x);
  const DouglasReport def = check_characterization(dd, tol);
  const double t = s.b2;
  const auto [rv, dr] = rho.value_and_derivative(t);
  Lemma42Check out;
  out.c = src.c;
  out.d = src.d;
  out.cbar_fit = def.c;
  out.dbar_fit = def.d;
  out.cbar = std::exp(-1.5 * rv) * ((1.0 + 2.0 * t * dr) * src.c + 2.0 * t * t * dr * src.d);
  out.dbar = -std::exp(-0.5 * rv) * (3.0 * dr * src.c - (1.0 - 3.0 * t * dr) * src.d);
  out.residual = std::max(std::abs(out.cbar - out.cbar_fit), std::abs(out.dbar - out.dbar_fit));
  out.source_sum = src.c + t * src.d;
  out.deformed_sum = def.c + dd.b2 * def.d;
  return out;
}

// ---------------------------------------------------------------------------
// factor families preserving r_ij = tau a_ij (first family) or producing
// r_ij = tau (b^2 a_ij - b_i b_j) (second family), both with the s_ij condition

enum class TheoremCase { a, b, c };

inline const char* to_string(TheoremCase c)
{
  switch (c) {
    case TheoremCase::a: return "a";
    case TheoremCase::b: return "b";
    case TheoremCase::c: return "c";
  }
  return "?";
}

struct CaseFactors
{
  int family = 1;  // 1: conformal target, 2: degenerate-conformal target
  TheoremCase which = TheoremCase::a;
  DeformationFactors factors;
};

/// Family 1: (a) nu = C(1 - t kappa)e^{2rho}; (b) nu = C sqrt(1 - t kappa) e^{2rho};
/// (c) kappa = C/t (C < 1), nu = D e^{2rho}. In case (c) the given kappa is ignored.
inline CaseFactors conformal_family_factors(TheoremCase which, ScalarFactor kappa, ScalarFactor rho, double C, double D = 1.0)
{
  auto r = std::make_shared<const ScalarFactor>(rho);
  CaseFactors out{1, which, {}};
  out.factors.name = std::string("family1") + to_string(which);
  out.factors.rho = rho;
  if (which == TheoremCase::c) {
    if (!(C < 1.0)) throw PreconditionError("family 1 case (c) requires C < 1");
    if (D == 0.0) throw PreconditionError("family 1 case (c) requires D != 0");
    out.factors.kappa = {"C/t", [C](const JetValue& t) { return C / t; }};
    out.factors.nu = {"D e^{2rho}", [r, D](const JetValue& t) { return exp((*r)(t) * 2.0) * D; }};
    return out;
  }
  if (C == 0.0) throw PreconditionError("family 1 requires C != 0");
  auto k = std::make_shared<const ScalarFactor>(kappa);
  out.factors.kappa = kappa;
  if (which == TheoremCase::a)
    out.factors.nu = {"C(1-tk)e^{2rho}", [k, r, C](const JetValue& t) { return (1.0 - t * (*k)(t)) * exp((*r)(t) * 2.0) * C; }};
  else
    out.factors.nu = {"C sqrt(1-tk) e^{2rho}", [k, r, C](const JetValue& t) { return sqrt(1.0 - t * (*k)(t)) * exp((*r)(t) * 2.0) * C; }};
  return out;
}

/// Family 2: (a) as family 1 (a); (b) nu = C sqrt(1 - t kappa) e^rho / sqrt(t);
/// (c) rho = -ln(1 - t kappa)/2 - ln(t)/2 + C, nu = D/t. In case (c) the given rho is ignored.
inline CaseFactors degenerate_family_factors(TheoremCase which, ScalarFactor kappa, ScalarFactor rho, double C, double D = 1.0)
{
  if (which == TheoremCase::a) {
    CaseFactors out = conformal_family_factors(TheoremCase::a, std::move(kappa), std::move(rho), C, D);
    out.family = 2;
    out.factors.name = "family2a";
    return out;
  }
  auto k = std::make_shared<const ScalarFactor>(kappa);
  CaseFactors out{2, which, {}};
  out.factors.name = std::string("family2") + to_string(which);
  out.factors.kappa = kappa;
  if (which == TheoremCase::b) {
    if (C == 0.0) throw PreconditionError("family 2 case (b) requires C != 0");
    auto r = std::make_shared<const ScalarFactor>(rho);
    out.factors.rho = rho;
    out.factors.nu = {"C sqrt(1-tk) e^rho / sqrt t", [k, r, C](const JetValue& t) { return sqrt(1.0 - t * (*k)(t)) * exp((*r)(t)) * C / sqrt(t); }};
    return out;
  }
  if (D == 0.0) throw PreconditionError("family 2 case (c) requires D != 0");
  out.factors.rho = {"-ln(1-tk)/2 - ln(t)/2 + C", [k, C](const JetValue& t) { return (log(1.0 - t * (*k)(t)) + log(t)) * -0.5 + C; }};
  out.factors.nu = {"D/t", [D](const JetValue& t) { return D / t; }};
  return out;
}

enum class SeedClass { killing, closed, parallel, neither };

inline const char* to_string(SeedClass c)
{
  switch (c) {
    case SeedClass::killing: return "killing";
    case SeedClass::closed: return "closed";
    case SeedClass::parallel: return "parallel";
    case SeedClass::neither: return "neither";
  }
  return "?";
}

/// Pointwise surrogate: closed if ||s_ij|| <= tol, Killing if ||r_ij|| <= tol, scaled by 1 + ||b_i|j||.
inline SeedClass classify(const BetaDerived& d, double tol = 1e-9)
{
  const double lim = tol * (1.0 + d.b_cov.norm());
  const bool closed = d.s.norm() <= lim;
  const bool killing = d.r.norm() <= lim;
  if (closed && killing) return SeedClass::parallel;
  if (closed) return SeedClass::closed;
  if (killing) return SeedClass::killing;
  return SeedClass::neither;
}

struct FamilyCheck
{
  SeedClass seed = SeedClass::neither;
  double seed_residual = 0.0;  // max residual of the seed's r_ij = tau a_ij and s_ij conditions
  bool seed_ok = false;
  double tau_bar = 0.0;
  double fit_residual = 0.0;   // target r-bar fit
  double s_residual = 0.0;     // target s-bar condition
  double tolerance = 0.0;
  bool holds = false;
  double bbar2 = 0.0;
  SeedClass result = SeedClass::neither;
  // degeneration: the displayed factor identity (g(t) constant) and its predicted outcome
  std::string identity;
  double identity_slope = 0.0;  // |t g'(t) / g(t)|
  bool identity_holds = false;
  std::string outcome;
  bool outcome_holds = false;
};

/// Applies a family/case factor set to a seed with r_ij = tau a_ij and the s_ij condition,
/// checks the target equations, and evaluates the degeneration predicate that belongs to
/// the seed's class (Killing seeds: (1 - t kappa) e^{2rho} t constant => beta-bar closed;
/// closed seeds: e^{2rho} t constant => beta-bar Killing, or parallel for family 2).
inline FamilyCheck verify_family(const FieldPair& pair, const CaseFactors& cf, std::span<const double> x, double tol = 1e-8, double class_tol = 1e-9)
{
  FamilyCheck out;
  const BetaDerived s = beta_derived(pair, x);
  const ConformalCheck seed = check_conformal_condition(s, tol);
  out.seed = classify(s, class_tol);
  out.seed_residual = std::max(seed.residual_r, seed.residual_s);
  out.seed_ok = seed.holds;
  if (!out.seed_ok) throw PreconditionError("seed pair does not satisfy r_ij = tau a_ij with the s_ij condition");

  const BetaDerived d = beta_derived(apply_deformation(pair, cf.factors).result, x);
  const ConformalCheck target = cf.family == 1 ? check_conformal_condition(d, tol) : check_degenerate_conformal_condition(d, tol);
  out.tau_bar = target.tau;
  out.fit_residual = target.residual_r;
  out.s_residual = target.residual_s;
  out.tolerance = scaled_tolerance(d, tol);
  out.holds = target.holds;
  out.bbar2 = d.b2;
  out.result = classify(d, class_tol);

  const auto& f = cf.factors;
  ScalarFactor g;
  if (out.seed == SeedClass::killing) {
    out.identity = "(1 - t kappa) e^{2 rho} t constant";
    g = {"g", [&f](const JetValue& t) { return (1.0 - t * f.kappa(t)) * exp(f.rho(t) * 2.0) * t; }};
    out.outcome = "beta-bar closed";
  } else {
    out.identity = "e^{2 rho} t constant";
    g = {"g", [&f](const JetValue& t) { return exp(f.rho(t) * 2.0) * t; }};
    out.outcome = cf.family == 1 ? "beta-bar Killing" : "beta-bar parallel";
  }
  const auto [gv, dg] = g.value_and_derivative(s.b2);
  out.identity_slope = std::abs(s.b2 * dg / gv);
  out.identity_holds = out.identity_slope <= class_tol;
  if (out.seed == SeedClass::killing)
    out.outcome_holds = out.result == SeedClass::closed || out.result == SeedClass::parallel;
  else if (cf.family == 1)
    out.outcome_holds = out.result == SeedClass::killing || out.result == SeedClass::parallel;
  else
    out.outcome_holds = out.result == SeedClass::parallel;
  return out;
}

inline FamilyCheck verify_theorem_71(const FieldPair& pair, TheoremCase which, const ScalarFactor& kappa, const ScalarFactor& rho, double C, double D,
                                     std::span<const double> x, double tol = 1e-8)
{
  return verify_family(pair, conformal_family_factors(which, kappa, rho, C, D), x, tol);
}

inline FamilyCheck verify_theorem_72(const FieldPair& pair, TheoremCase which, const ScalarFactor& kappa, const ScalarFactor& rho, double C, double D,
                                     std::span<const double> x, double tol = 1e-8)
{
  return verify_family(pair, degenerate_family_factors(which, kappa, rho, C, D), x, tol);
}

/// Max pointwise mismatch of (a_ij, d_k a_ij, b_i, d_k b_i) between two pairs at x.
inline double pair_distance(const FieldPair& p, const FieldPair& q, std::span<const double> x)
{
  const int n = p.dimension();
  const JetSpec spec = first_order_spec(n);
  const auto xs = seed_point(spec, VarKind::x, x);
  const JetMatrix a = p.alpha(xs), b = q.alpha(xs);
  const auto u = p.beta(xs), v = q.beta(xs);
  double dist = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto ca = a(i, j).coefficients(), cb = b(i, j).coefficients();
      for (std::size_t k = 0; k < ca.size(); ++k) dist = std::max(dist, std::abs(ca[k] - cb[k]));
    }
    const auto cu = u[static_cast<std::size_t>(i)].coefficients(), cv = v[static_cast<std::size_t>(i)].coefficients();
    for (std::size_t k = 0; k < cu.size(); ++k) dist = std::max(dist, std::abs(cu[k] - cv[k]));
  }
  return dist;
}

}  // namespace finsler
