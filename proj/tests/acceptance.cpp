// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "finsler/deform.hpp"
#include "finsler/douglas.hpp"
#include "finsler/gab.hpp"
#include "support/expr_oracle.hpp"

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace finsler;
namespace fs = std::filesystem;
using finsler::testing::mp;

namespace {

// tolerances
constexpr double kJetRel = 1e-6;
constexpr double kJetPolyRel = 1e-12;
constexpr double kCharTol = 1e-8;
constexpr double kTensorTol = 1e-8;
constexpr double kOracleTol = 1e-7;
constexpr double kNegative = 1e-3;
constexpr double kNegativeFraction = 0.9;
constexpr double kSufficiencyRel = 1e-10;
constexpr double kTwoPathTol = 1e-9;
constexpr double kNormLawRel = 1e-12;
constexpr double kTargetTol = 1e-8;
constexpr double kRoundTrip = 1e-9;
constexpr double kChord = 1e-6;
constexpr double kDetTol = 1e-9;

struct Outcome
{
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what)
  {
    if (!ok) {
      pass = false;
      notes.push_back("violated: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string sci(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

using Point = std::vector<double>;

std::vector<Point> shell_points(std::mt19937_64& gen, int n, int count, double rmin, double rmax, const std::function<bool(std::span<const double>)>& domain)
{
  std::uniform_real_distribution<double> u(-rmax, rmax);
  std::vector<Point> pts;
  while (static_cast<int>(pts.size()) < count) {
    Point x(static_cast<std::size_t>(n));
    double r2 = 0.0;
    for (double& v : x) {
      v = u(gen);
      r2 += v * v;
    }
    const double r = std::sqrt(r2);
    if (r >= rmin && r <= rmax && (!domain || domain(x))) pts.push_back(std::move(x));
  }
  return pts;
}

ScalarFactor fn(std::string name, std::function<JetValue(const JetValue&)> f) { return {std::move(name), std::move(f)}; }

FieldPair reduced_killing() { return apply_deformation(catalog_rotational_killing(), prop61_inverse_factors()).result; }

// flat conformal deformed by kappa = 0, rho = ln(t)/2, nu = t^{1/4}: d != 0
FieldPair seed_with_d()
{
  return apply_deformation(catalog_flat_conformal(2), {ScalarFactor::constant(0.0), fn("ln(t)/2", [](const JetValue& t) { return log(t) * 0.5; }),
                                                       fn("t^{1/4}", [](const JetValue& t) { return pow(t, 1, 4); }), "seed_d"})
      .result;
}

std::vector<DeformationFactors> factor_sets()
{
  return {
      {ScalarFactor::polynomial({0.0, 0.25}), ScalarFactor::polynomial({0.0, 0.1}), ScalarFactor::polynomial({1.0, 0.2}), "polynomial"},
      {ScalarFactor::constant(-0.3), fn("0.3 ln t", [](const JetValue& t) { return log(t) * 0.3; }), fn("t^0.7", [](const JetValue& t) { return pow(t, 0.7); }),
       "log-power"},
      {fn("0.2 e^{-t}", [](const JetValue& t) { return exp(-t) * 0.2; }), fn("-0.2 t^2", [](const JetValue& t) { return t * t * -0.2; }),
       fn("e^{t/3}", [](const JetValue& t) { return exp(t / 3.0); }), "exponential"},
  };
}

// ---------------------------------------------------------------------------

Outcome criterion_1()
{
  Outcome o;
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> coord(-0.5, 0.5);
  const JetSpec spec{2, 2, 4};
  const auto idx = finsler::testing::multi_indices(2, 4);
  const mp h("1e-7");
  double worst = 0.0;
  for (int e = 0; e < 100; ++e) {
    const auto ex = finsler::testing::random_expr(gen, 4);
    const std::array<double, 4> p{coord(gen), coord(gen), coord(gen), coord(gen)};
    const std::array<mp, 4> pm{mp(p[0]), mp(p[1]), mp(p[2]), mp(p[3])};
    const JetValue j = finsler::testing::eval_jet(ex, spec, p);
    for (const auto& k : idx) {
      const mp ref = finsler::testing::central_partial([&](const std::array<mp, 4>& q) { return finsler::testing::eval_mp(ex, q); }, pm, k, h);
      const double r = ref.convert_to<double>();
      worst = std::max(worst, std::abs(finsler::testing::jet_partial(j, k) - r) / std::max(1.0, std::abs(r)));
    }
  }
  o.require(worst <= kJetRel, "composite expressions: max relative error " + sci(worst));
  o.note("100 composite expressions x " + std::to_string(idx.size()) + " partials, max rel err " + sci(worst));

  // polynomials against exact monomial derivatives
  double worst_poly = 0.0;
  std::uniform_int_distribution<int> ex(0, 4);
  std::uniform_real_distribution<double> cf(-1.0, 1.0);
  for (int e = 0; e < 100; ++e) {
    struct Term
    {
      double c;
      std::array<int, 4> m;
    };
    std::vector<Term> terms;
    for (int t = 0; t < 8; ++t) terms.push_back({cf(gen), {ex(gen) % 4, ex(gen) % 4, ex(gen), ex(gen)}});
    const std::array<double, 4> p{coord(gen), coord(gen), coord(gen), coord(gen)};
    const std::array<JetValue, 4> v{JetValue::variable(spec, dx(0), p[0]), JetValue::variable(spec, dx(1), p[1]), JetValue::variable(spec, dy(0), p[2]),
                                    JetValue::variable(spec, dy(1), p[3])};
    JetValue poly = JetValue::constant(spec, 0.0);
    for (const auto& t : terms) {
      JetValue m = JetValue::constant(spec, t.c);
      for (std::size_t q = 0; q < 4; ++q) m = m * ipow(v[q], t.m[q]);
      poly += m;
    }
    for (const auto& k : idx) {
      long double exact = 0.0L;
      for (const auto& t : terms) {
        long double term = t.c;
        for (std::size_t q = 0; q < 4; ++q) {
          if (k[q] > t.m[q]) {
            term = 0.0L;
            break;
          }
          for (int f = 0; f < k[q]; ++f) term *= (t.m[q] - f);
          term *= std::pow(static_cast<long double>(p[q]), t.m[q] - k[q]);
        }
        exact += term;
      }
      const double ex_d = static_cast<double>(exact);
      worst_poly = std::max(worst_poly, std::abs(finsler::testing::jet_partial(poly, k) - ex_d) / std::max(1.0, std::abs(ex_d)));
    }
  }
  o.require(worst_poly <= kJetPolyRel, "polynomials: max relative error " + sci(worst_poly));
  o.note("100 polynomials, max rel err " + sci(worst_poly));
  return o;
}

struct CatalogEntry
{
  std::string label;
  FieldPair pair;
  double rmin, rmax;
};

std::vector<CatalogEntry> positive_catalog()
{
  const auto kap = ScalarFactor::polynomial({0.0, 0.25});
  const auto rho = ScalarFactor::polynomial({0.0, 0.1});
  return {
      {"flat_conformal n=2", catalog_flat_conformal(2), 0.2, 0.9},
      {"flat_conformal n=3", catalog_flat_conformal(3), 0.2, 0.9},
      {"rotational_killing (reduced: alpha/b^3, beta/b^3)", reduced_killing(), 0.2, 0.9},
      {"example_71 mu=0", catalog_example_71(0.0, 3), 0.2, 0.9},
      {"example_71 mu=1", catalog_example_71(1.0, 3), 0.2, 0.9},
      {"example_71 mu=-0.5", catalog_example_71(-0.5, 3), 0.2, 0.9},
      {"example_72 mu=0.5", catalog_example_72(0.5, 3), 0.2, 0.9},
      {"example_73 kappa=t/4 rho=t/10", catalog_example_73(kap, rho), 0.2, 0.9},
  };
}

Outcome criterion_2()
{
  Outcome o;
  std::mt19937_64 gen(77);
  CrossValidationOptions opt;
  opt.tol = kCharTol;
  opt.tensor_tol = kTensorTol;
  opt.oracle_tol = kOracleTol;
  for (const auto& e : positive_catalog()) {
    double mr = 0.0, ms = 0.0, mt = 0.0, md = 0.0, mo = 0.0;
    int ok = 0;
    const auto pts = shell_points(gen, e.pair.dimension(), 50, e.rmin, e.rmax, [&](std::span<const double> x) { return e.pair.contains(x); });
    for (const auto& x : pts) {
      const auto cv = cross_validate(e.pair, x, opt);
      const auto& r = cv.report;
      mr = std::max(mr, r.r_residual);
      ms = std::max(ms, r.s_residual);
      mt = std::max(mt, r.theta_residual);
      md = std::max(md, r.douglas_tensor_norm);
      mo = std::max(mo, r.oracle_residual);
      const bool good = r.verdict == Verdict::douglas && r.r_residual <= kCharTol && r.s_residual <= kCharTol && r.theta_residual <= kCharTol &&
                        r.douglas_tensor_norm <= kTensorTol && r.oracle_residual <= kOracleTol && cv.agree();
      ok += good ? 1 : 0;
    }
    o.require(ok == 50, e.label + ": " + std::to_string(ok) + "/50 points with three-way douglas agreement");
    o.note(e.label + ": " + std::to_string(ok) + "/50, max r " + sci(mr) + " s " + sci(ms) + " theta " + sci(mt) + " D " + sci(md) + " oracle " + sci(mo));
  }
  // the raw rotational pair is reported, not counted: all three methods reject it
  {
    const auto raw = catalog_rotational_killing();
    int agree_not = 0;
    const auto pts = shell_points(gen, 2, 50, 0.2, 0.9, {});
    for (const auto& x : pts) {
      const auto cv = cross_validate(raw, x, opt);
      agree_not += (!cv.by_characterization && !cv.by_tensor && !cv.by_oracle) ? 1 : 0;
    }
    o.note("info: raw rotational_killing pair (alpha=|y|, beta=x2 y1 - x1 y2): " + std::to_string(agree_not) + "/50 points where all three methods say not Douglas");
  }
  return o;
}

Outcome criterion_3()
{
  Outcome o;
  std::mt19937_64 gen(31);
  for (int n : {3, 2}) {
    const auto p = catalog_perturbed_conformal(n, 0.1);
    const auto pts = shell_points(gen, n, 50, 0.2, 0.9, {});
    int flagged = 0;
    double min_r = 1e300, min_d = 1e300, min_o = 1e300;
    for (const auto& x : pts) {
      const auto cv = cross_validate(p, x);
      const auto& r = cv.report;
      min_r = std::min(min_r, r.r_residual);
      min_d = std::min(min_d, r.douglas_tensor_norm);
      min_o = std::min(min_o, r.oracle_residual);
      flagged += (r.r_residual > kNegative && r.douglas_tensor_norm > kNegative && r.oracle_residual > kNegative) ? 1 : 0;
    }
    const double frac = flagged / 50.0;
    o.require(frac >= kNegativeFraction, "n=" + std::to_string(n) + ": fraction flagged " + sci(frac));
    o.note("perturbed n=" + std::to_string(n) + ": " + std::to_string(flagged) + "/50 flagged by all three, min r " + sci(min_r) + " D " + sci(min_d) + " oracle " +
           sci(min_o));
  }
  return o;
}

Outcome criterion_4()
{
  Outcome o;
  std::mt19937_64 gen(44);
  std::normal_distribution<double> nd;
  for (const auto& e : positive_catalog()) {
    double worst = 0.0;
    int checked = 0;
    const auto pts = shell_points(gen, e.pair.dimension(), 20, e.rmin, e.rmax, [&](std::span<const double> x) { return e.pair.contains(x); });
    for (const auto& x : pts) {
      const BetaDerived bd = beta_derived(e.pair, x);
      const auto r = check_characterization(bd);
      for (int k = 0; k < 3; ++k) {
        Point y(static_cast<std::size_t>(bd.n));
        for (double& v : y) v = nd(gen);
        if (std::abs(bd.beta<double>(y)) > 0.9 * std::sqrt(bd.b2 * bd.alpha_squared<double>(y))) continue;
        worst = std::max(worst, sufficiency_spray_check(e.pair, x, y, r.c, r.d));
        ++checked;
      }
    }
    o.require(worst <= kSufficiencyRel, e.label + ": relative spray mismatch " + sci(worst));
    o.note(e.label + ": " + std::to_string(checked) + " (x, y) samples, max rel " + sci(worst));
  }
  return o;
}

Outcome criterion_5()
{
  Outcome o;
  std::mt19937_64 gen(55);
  const std::vector<std::pair<std::string, FieldPair>> seeds{{"flat_conformal", catalog_flat_conformal(2)}, {"rotational_killing", catalog_rotational_killing()}};
  for (const auto& [sname, seed] : seeds)
    for (const auto& f : factor_sets()) {
      const auto def = apply_deformation(seed, f).result;
      const auto pts = shell_points(gen, 2, 100, 0.2, 1.2, [&](std::span<const double> x) { return seed.contains(x) && def.contains(x); });
      double wr = 0.0, ws = 0.0;
      for (const auto& x : pts) {
        const auto r = verify_prop_41(seed, f, x);
        wr = std::max(wr, r.r_residual);
        ws = std::max(ws, r.s_residual);
      }
      o.require(wr <= kTwoPathTol && ws <= kTwoPathTol, sname + " / " + f.name + ": r " + sci(wr) + " s " + sci(ws));
      o.note(sname + " / " + f.name + ": 100 points, max r-bar residual " + sci(wr) + ", s-bar residual " + sci(ws));
    }
  return o;
}

struct Applied
{
  std::string label;
  FieldPair seed;
  DeformationFactors factors;
  int dim;
};

std::vector<Applied> all_deformations()
{
  std::vector<Applied> out;
  for (const auto& f : factor_sets()) {
    out.push_back({"flat_conformal/" + f.name, catalog_flat_conformal(2), f, 2});
    out.push_back({"rotational_killing/" + f.name, catalog_rotational_killing(), f, 2});
    out.push_back({"perturbed n=3/" + f.name, catalog_perturbed_conformal(3), f, 3});
  }
  const auto c = fn("2u^{-3/2}", [](const JetValue& u) { return pow(u, -3, 2) * 2.0; });
  const auto d = fn("-1.5u^{-5/2}", [](const JetValue& u) { return pow(u, -5, 2) * -1.5; });
  out.push_back({"flat_conformal/unit_length", catalog_flat_conformal(2), unit_length_factors(), 2});
  out.push_back({"example_71/unit_length", catalog_example_71(1.0, 3), unit_length_factors(), 3});
  out.push_back({"flat_conformal/prop51", catalog_flat_conformal(3), prop51_factors(), 3});
  out.push_back({"flat_conformal/prop51_inverse", catalog_flat_conformal(3), prop51_inverse_factors(), 3});
  out.push_back({"example_72/prop61", catalog_example_72(0.5, 3), prop61_factors(), 3});
  out.push_back({"rotational_killing/prop61_inverse", catalog_rotational_killing(), prop61_inverse_factors(), 2});
  out.push_back({"seed_d/case1", seed_with_d(), case1_factors(c, d, 0.5), 2});
  out.push_back({"seed_d/conformal", seed_with_d(), conformal_factors(c, d, ScalarFactor::polynomial({0.0, 0.1}), 2.0, 1.5, 0.5), 2});
  out.push_back({"example_72/case2", catalog_example_72(0.5, 3), case2_factors(ScalarFactor::polynomial({0.0, 0.2}), ScalarFactor::polynomial({0.0, 0.1}), 1.0), 3});
  const auto kap = ScalarFactor::polynomial({0.0, 0.25});
  const auto rho = ScalarFactor::polynomial({0.0, 0.1});
  for (auto w : {TheoremCase::a, TheoremCase::b, TheoremCase::c}) {
    out.push_back({std::string("rotational_killing/family1") + to_string(w), catalog_rotational_killing(), conformal_family_factors(w, kap, rho, w == TheoremCase::c ? 0.3 : 1.0, 2.0).factors, 2});
    out.push_back({std::string("flat_conformal/family2") + to_string(w), catalog_flat_conformal(2), degenerate_family_factors(w, kap, rho, w == TheoremCase::c ? 0.3 : 1.0, 2.0).factors, 2});
  }
  return out;
}

Outcome criterion_6()
{
  Outcome o;
  std::mt19937_64 gen(66);
  double worst_law = 0.0;
  int count = 0;
  std::string worst_label;
  for (const auto& a : all_deformations()) {
    const auto def = apply_deformation(a.seed, a.factors).result;
    const auto pts = shell_points(gen, a.dim, 20, 0.2, 1.1, [&](std::span<const double> x) { return a.seed.contains(x) && def.contains(x); });
    for (const auto& x : pts) {
      const double r = norm_law_residual(a.seed, a.factors, x);
      if (r > worst_law) {
        worst_law = r;
        worst_label = a.label;
      }
      ++count;
    }
  }
  o.require(worst_law <= kNormLawRel, "b-bar^2 law relative residual " + sci(worst_law) + " (" + worst_label + ")");
  o.note("b-bar^2 law over " + std::to_string(count) + " (deformation, point) pairs, max rel " + sci(worst_law));

  double worst_inv = 0.0, killing_lhs = 0.0, min_rhs = 1e300;
  for (const auto& f : factor_sets()) {
    for (int n : {2, 3}) {
      const auto p = catalog_perturbed_conformal(n);
      const auto def = apply_deformation(p, f).result;
      for (const auto& x : shell_points(gen, n, 30, 0.3, 1.1, [&](std::span<const double> x) { return def.contains(x); })) {
        const auto r = verify_lemma_inv(p, f, x);
        worst_inv = std::max(worst_inv, r.residual);
        if (n == 3) min_rhs = std::min(min_rhs, r.rhs_norm);
      }
    }
    const auto rk = catalog_rotational_killing();
    const auto def = apply_deformation(rk, f).result;
    for (const auto& x : shell_points(gen, 2, 30, 0.3, 1.1, [&](std::span<const double> x) { return def.contains(x); })) {
      const auto r = verify_lemma_inv(rk, f, x);
      worst_inv = std::max(worst_inv, r.residual);
      killing_lhs = std::max(killing_lhs, r.lhs_norm);
    }
  }
  o.require(worst_inv <= kTwoPathTol, "s-condition identity residual " + sci(worst_inv));
  o.note("s-condition identity: max residual " + sci(worst_inv) + " (non-conforming n=3 right side >= " + sci(min_rhs) + "); preserved on Killing seed, lhs <= " +
         sci(killing_lhs));
  return o;
}

Outcome criterion_7()
{
  Outcome o;
  std::mt19937_64 gen(77);
  const std::vector<std::pair<std::string, ScalarFactor>> rhos{{"t/10", ScalarFactor::polynomial({0.0, 0.1})},
                                                               {"0.3 ln t", fn("0.3 ln t", [](const JetValue& t) { return log(t) * 0.3; })},
                                                               {"const 0.4", ScalarFactor::constant(0.4)}};
  struct Src
  {
    std::string label;
    FieldPair pair;
    bool case2;
  };
  const std::vector<Src> srcs{{"flat_conformal n=2", catalog_flat_conformal(2), false},
                              {"flat_conformal n=3", catalog_flat_conformal(3), false},
                              {"seed with d != 0", seed_with_d(), false},
                              {"example_71 mu=1", catalog_example_71(1.0, 3), false},
                              {"example_72 (c + b^2 d = 0)", catalog_example_72(0.5, 3), true},
                              {"example_73 (c = d = 0)", catalog_example_73(ScalarFactor::polynomial({0.0, 0.25}), ScalarFactor::polynomial({0.0, 0.1})), true}};
  for (const auto& s : srcs) {
    double wr = 0.0, wsum = 0.0;
    for (const auto& [rl, rho] : rhos)
      for (const auto& x : shell_points(gen, s.pair.dimension(), 20, 0.2, 0.9, [&](std::span<const double> x) { return s.pair.contains(x); })) {
        const auto r = verify_lemma_42(s.pair, rho, x);
        wr = std::max(wr, r.residual);
        if (s.case2) wsum = std::max({wsum, std::abs(r.source_sum), std::abs(r.deformed_sum)});
      }
    o.require(wr <= kTwoPathTol, s.label + ": c-bar/d-bar mismatch " + sci(wr));
    if (s.case2) o.require(wsum <= kTwoPathTol, s.label + ": c-bar + b-bar^2 d-bar = " + sci(wsum));
    o.note(s.label + ": max c-bar/d-bar mismatch " + sci(wr) + (s.case2 ? ", max |c + b^2 d| before/after " + sci(wsum) : ""));
  }
  return o;
}

Outcome criterion_8()
{
  Outcome o;
  std::mt19937_64 gen(88);
  // conformal targets
  {
    double wr = 0.0, ws = 0.0, rt = 0.0;
    for (int n : {2, 3}) {
      const auto fc = catalog_flat_conformal(n);
      for (const auto& x : shell_points(gen, n, 30, 0.2, 1.1, {})) {
        const auto q = apply_deformation(fc, prop51_factors());
        const auto c = check_conformal_condition(q.result, x);
        wr = std::max(wr, c.residual_r);
        ws = std::max(ws, c.residual_s);
        rt = std::max(rt, pair_distance(apply_deformation(q, prop51_inverse_factors()).result, fc, x));
      }
    }
    o.require(wr <= kTargetTol && ws <= kTargetTol, "prop51 target residuals " + sci(wr) + " / " + sci(ws));
    o.require(rt <= kRoundTrip, "prop51 round trip " + sci(rt));
    o.note("prop51 on flat_conformal n=2,3: target r " + sci(wr) + " s " + sci(ws) + ", round trip " + sci(rt));
  }
  {
    const auto c = fn("2u^{-3/2}", [](const JetValue& u) { return pow(u, -3, 2) * 2.0; });
    const auto d = fn("-1.5u^{-5/2}", [](const JetValue& u) { return pow(u, -5, 2) * -1.5; });
    const auto seed = seed_with_d();
    const auto q = apply_deformation(seed, conformal_factors(c, d, ScalarFactor::polynomial({0.0, 0.1}), 2.0, 1.5, 0.5)).result;
    double wr = 0.0, ws = 0.0;
    for (const auto& x : shell_points(gen, 2, 30, 0.3, 1.0, [&](std::span<const double> x) { return q.contains(x); })) {
      const auto cc = check_conformal_condition(q, x);
      wr = std::max(wr, cc.residual_r);
      ws = std::max(ws, cc.residual_s);
    }
    o.require(wr <= kTargetTol && ws <= kTargetTol, "conformal factory target residuals " + sci(wr) + " / " + sci(ws));
    o.note("conformal factory (quadrature) on seed with d != 0: target r " + sci(wr) + " s " + sci(ws));
  }
  // degenerate-conformal targets
  {
    double wr = 0.0, ws = 0.0, rt = 0.0;
    const std::vector<FieldPair> seeds{catalog_example_72(0.5, 3), catalog_example_73(ScalarFactor::polynomial({0.0, 0.25}), ScalarFactor::polynomial({0.0, 0.1}))};
    for (const auto& s : seeds)
      for (const auto& x : shell_points(gen, s.dimension(), 30, 0.2, 0.9, [&](std::span<const double> x) { return s.contains(x); })) {
        const auto q = apply_deformation(s, prop61_factors());
        const auto c = check_degenerate_conformal_condition(q.result, x);
        wr = std::max(wr, c.residual_r);
        ws = std::max(ws, c.residual_s);
        rt = std::max(rt, pair_distance(apply_deformation(q, prop61_inverse_factors()).result, s, x));
      }
    o.require(wr <= kTargetTol && ws <= kTargetTol, "prop61 target residuals " + sci(wr) + " / " + sci(ws));
    o.require(rt <= kRoundTrip, "prop61 round trip " + sci(rt));
    o.note("prop61 on example_72, example_73: target r " + sci(wr) + " s " + sci(ws) + ", round trip " + sci(rt));
  }
  // unit length
  {
    double w = 0.0;
    const std::vector<FieldPair> seeds{catalog_flat_conformal(2), catalog_flat_conformal(3), seed_with_d(), catalog_example_71(1.0, 3)};
    for (const auto& s : seeds) {
      const auto q = apply_deformation(s, unit_length_factors()).result;
      for (const auto& x : shell_points(gen, s.dimension(), 30, 0.1, 1.2, [&](std::span<const double> x) { return q.contains(x); }))
        w = std::max(w, std::abs(beta_derived(q, x).b2 - 1.0));
    }
    o.require(w <= 1e-12, "unit-length |b-bar^2 - 1| " + sci(w));
    o.note("unit-length factory: max |b-bar^2 - 1| " + sci(w));
  }
  return o;
}

struct FamilyRun
{
  std::string label;
  FieldPair seed;
  int family;
  TheoremCase which;
  ScalarFactor kappa, rho;
  double C, D;
  bool expect_identity;
};

Outcome criterion_9()
{
  Outcome o;
  std::mt19937_64 gen(99);
  const auto kap = ScalarFactor::polynomial({0.0, 0.25});
  const auto rho = ScalarFactor::polynomial({0.0, 0.1});
  const auto half = fn("-ln(t/2)/2", [](const JetValue& t) { return log(t / 2.0) * -0.5; });
  const auto inv_half = fn("-ln(t)/2", [](const JetValue& t) { return log(t) * -0.5; });
  const auto kt = fn("0.3/t", [](const JetValue& t) { return 0.3 / t; });
  const auto zero = ScalarFactor::constant(0.0);
  const auto fc = catalog_flat_conformal(2);
  const auto rk = catalog_rotational_killing();
  const std::vector<FamilyRun> runs{
      {"family 1 (a) killing seed", rk, 1, TheoremCase::a, kap, rho, 1.0, 1.0, false},
      {"family 1 (a) killing seed, (1-t kappa)e^{2rho} = 2/t", rk, 1, TheoremCase::a, zero, half, 1.0, 1.0, true},
      {"family 1 (b) closed seed", fc, 1, TheoremCase::b, kap, rho, 1.0, 1.0, false},
      {"family 1 (b) closed seed, e^{2rho} = 2/t", fc, 1, TheoremCase::b, kap, half, 1.0, 1.0, true},
      {"family 1 (c) closed seed", fc, 1, TheoremCase::c, zero, rho, 0.3, 2.0, false},
      {"family 1 (c) closed seed, e^{2rho} = 2/t", fc, 1, TheoremCase::c, zero, half, 0.3, 2.0, true},
      {"family 1 (c) killing seed", rk, 1, TheoremCase::c, zero, rho, 0.3, 2.0, false},
      {"family 1 (c) killing seed, e^{2rho} = 1/t", rk, 1, TheoremCase::c, zero, inv_half, 0.3, 2.0, true},
      {"family 2 (a) killing seed", rk, 2, TheoremCase::a, kap, rho, 1.0, 1.0, false},
      {"family 2 (a) killing seed, (1-t kappa)e^{2rho} = 2/t", rk, 2, TheoremCase::a, zero, half, 1.0, 1.0, true},
      {"family 2 (b) closed seed", fc, 2, TheoremCase::b, kap, rho, 1.0, 1.0, false},
      {"family 2 (b) closed seed, e^{2rho} = 2/t", fc, 2, TheoremCase::b, kap, half, 1.0, 1.0, true},
      {"family 2 (c) closed seed", fc, 2, TheoremCase::c, kap, zero, 0.3, 2.0, false},
      {"family 2 (c) closed seed, t kappa = 0.3", fc, 2, TheoremCase::c, kt, zero, 0.3, 2.0, true},
      // (1 - t kappa) e^{2 rho} t = e^{2C} for every kappa here, so beta-bar is always closed
      {"family 2 (c) killing seed", rk, 2, TheoremCase::c, kap, zero, 0.3, 2.0, true},
  };
  for (const auto& r : runs) {
    const CaseFactors cf = r.family == 1 ? conformal_family_factors(r.which, r.kappa, r.rho, r.C, r.D) : degenerate_family_factors(r.which, r.kappa, r.rho, r.C, r.D);
    const auto def = apply_deformation(r.seed, cf.factors).result;
    double wf = 0.0, ws = 0.0, bmin = 1e300, bmax = 0.0;
    int holds = 0, trig = 0, id = 0;
    const auto pts = shell_points(gen, 2, 30, 0.2, 1.1, [&](std::span<const double> x) { return r.seed.contains(x) && def.contains(x); });
    for (const auto& x : pts) {
      const auto c = verify_family(r.seed, cf, x);
      wf = std::max(wf, c.fit_residual);
      ws = std::max(ws, c.s_residual);
      holds += (c.holds && c.fit_residual <= kTargetTol && c.s_residual <= kTargetTol) ? 1 : 0;
      id += c.identity_holds ? 1 : 0;
      trig += (c.identity_holds == c.outcome_holds) ? 1 : 0;
      bmin = std::min(bmin, c.bbar2);
      bmax = std::max(bmax, c.bbar2);
    }
    const int m = static_cast<int>(pts.size());
    o.require(holds == m, r.label + ": target holds at " + std::to_string(holds) + "/" + std::to_string(m));
    o.require(id == (r.expect_identity ? m : 0), r.label + ": identity detected at " + std::to_string(id) + "/" + std::to_string(m));
    o.require(trig == m, r.label + ": degeneration matched identity at " + std::to_string(trig) + "/" + std::to_string(m));
    std::string extra;
    if (r.family == 2 && r.which == TheoremCase::b) {
      o.require(bmax - bmin <= 1e-12 && std::abs(bmax - r.C * r.C) <= 1e-12, r.label + ": b-bar^2 not constant C^2");
      extra = ", b-bar^2 in [" + sci(bmin) + ", " + sci(bmax) + "]";
    }
    o.note(r.label + ": fit " + sci(wf) + " s " + sci(ws) + ", identity " + std::to_string(id) + "/" + std::to_string(m) + ", degeneration matches " +
           std::to_string(trig) + "/" + std::to_string(m) + extra);
  }
  {
    // outside its hypothesis case (a) does not apply; reported only
    const auto c = verify_theorem_71(fc, TheoremCase::a, kap, rho, 1.0, 1.0, Point{0.5, 0.3});
    o.note(std::string("info: family 1 (a) on a closed seed (outside its hypothesis): target ") + (c.holds ? "holds" : "fails") + ", fit residual " + sci(c.fit_residual));
  }
  return o;
}

Outcome criterion_10()
{
  Outcome o;
  std::mt19937_64 gen(1010);
  for (int n : {2, 3}) {
    const auto F = FinslerMetric::closed_form(catalog_berwald(n));
    double worst = 0.0;
    for (const auto& x : shell_points(gen, n, 50, 0.0, 0.8, {}))
      for (const auto& y : sphere_samples(n, 8)) worst = std::max(worst, douglas_tensor(F, x, y).normalized);
    o.require(worst <= kTensorTol, "berwald n=" + std::to_string(n) + " Douglas tensor " + sci(worst));
    o.note("berwald n=" + std::to_string(n) + ": 50 points x 8 directions, max normalized Douglas tensor " + sci(worst));
  }
  const auto F = FinslerMetric::closed_form(catalog_berwald(2));
  const Point x0{0.1, 0.2};
  double chord = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 8 + 0.1;
    GeodesicOptions opt{20.0, 1e-3, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1] >= 0.81; }, SprayRoute::automatic};
    const auto tr = geodesic_integrate(F, x0, Point{std::cos(th), std::sin(th)}, opt);
    o.require(tr.termination == Termination::stopped, "berwald geodesic did not reach |x| = 0.9");
    chord = std::max(chord, tr.chord_deviation);
  }
  o.require(chord <= kChord, "chord deviation " + sci(chord));
  o.note("berwald geodesics from (0.1, 0.2), 8 directions to |x| = 0.9 at step 1e-3: max chord deviation " + sci(chord));

  // The chord deviation sits at roundoff for straight geodesics, so the fourth-order
  // check uses the self-convergence of the end state under step halving.
  const double ratio_b = self_convergence_ratio(F, x0, Point{0.5 * std::cos(0.4), 0.5 * std::sin(0.4)}, 1.0, 0.05);
  const auto E = FinslerMetric::alpha_beta(catalog_example_71(1.0, 2), phi_square_singular());
  const double ratio_e = self_convergence_ratio(E, Point{0.4, 0.3}, Point{0.2, 0.5}, 0.5, 0.02);
  o.require(ratio_b >= 8.0 && ratio_b <= 32.0, "berwald convergence ratio " + sci(ratio_b));
  o.require(ratio_e >= 8.0 && ratio_e <= 32.0, "example_71 convergence ratio " + sci(ratio_e));
  o.note("step-halving error ratios (16 for fourth order): berwald " + sci(ratio_b) + ", example_71 mu=1 " + sci(ratio_e));
  return o;
}

Outcome criterion_11()
{
  Outcome o;
  const auto reg = regularity_scan(phi_square_regular(), 0.81, 2001);
  o.require(reg.min_first >= 0.19 - 1e-12 && reg.min_second > 0.0 && reg.regular, "regular square b=0.9");
  o.note("regular square b=0.9: min(phi - s phi_2) = " + sci(reg.min_first) + ", min second = " + sci(reg.min_second));

  const auto phi = phi_square_singular();
  const JetSpec spec{2, 0, 0};
  const auto b2 = JetValue::constant(spec, 1.0);
  double edge = 0.0;
  for (double s : {1.0, -1.0}) {
    const auto js = JetValue::constant(spec, s);
    edge = std::max(edge, std::abs((phi.phi(b2, js) - js * phi.phi2(b2, js)).value()));
  }
  o.require(edge <= 1e-12, "singular phi - s phi_2 at s = +-1: " + sci(edge));

  double det = 0.0;
  for (int n : {2, 3}) {
    const auto F = singular_square(catalog_flat_conformal(n));
    std::mt19937_64 gen(1111 + n);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 10; ++k) {
      Point x(static_cast<std::size_t>(n));
      double r = 0.0;
      for (double& v : x) {
        v = nd(gen);
        r += v * v;
      }
      for (double& v : x) v /= std::sqrt(r);
      for (double sign : {1.0, -1.0}) {
        Point y(x);
        for (double& v : y) v *= sign;
        det = std::max(det, std::abs(fundamental_tensor(F, x, y).determinant()));
      }
    }
  }
  o.require(det <= kDetTol, "det g on the singular directions " + sci(det));
  o.note("singular square at b = 1: |phi - s phi_2| at s = +-1 " + sci(edge) + ", max |det g| on s = +-b " + sci(det));

  const auto F = singular_square(catalog_flat_conformal(2));
  for (const auto& x : std::vector<Point>{{1.0, 0.0}, {0.0, 1.0}}) {
    int unbounded = 0;
    for (const auto& p : indicatrix_points(F, x, 360)) unbounded += p.unbounded ? 1 : 0;
    o.require(unbounded == 1, "indicatrix unbounded directions " + std::to_string(unbounded));
    o.note("indicatrix at x = (" + sci(x[0]) + ", " + sci(x[1]) + "), 360 angles: " + std::to_string(unbounded) + " unbounded");
  }
  return o;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& config, const fs::path& out, const std::string& extra = "")
{
  const std::string cmd = std::string(FINSLER_CLI_PATH) + " -c " + config + " -o " + out.string() + " " + extra + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json summary_of(const std::string& report)
{
  std::istringstream in(report);
  std::string line;
  nlohmann::json last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') last = nlohmann::json::parse(line);
  return last;
}

Outcome criterion_12()
{
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("finsler_acceptance_" + std::to_string(::getpid()));
  const std::string dir = FINSLER_CONFIG_DIR;
  struct Case
  {
    std::string file;
    std::string report;
    int expect;
  };
  const std::vector<Case> cases{
      {"check_douglas_flat.json", "check_douglas_flat.jsonl", 0},   {"check_douglas_perturbed.json", "check_douglas_perturbed.jsonl", 0},
      {"check_douglas_berwald.json", "check_douglas_berwald.jsonl", 0}, {"deform_prop41.json", "deform_prop41.jsonl", 0},
      {"deform_family.json", "deform_family.jsonl", 0},             {"roundtrip_prop51.json", "roundtrip_prop51.jsonl", 0},
      {"indicatrix_singular.json", "indicatrix_singular.jsonl", 0}, {"geodesic_berwald.json", "geodesic_berwald.jsonl", 0},
      {"regularity_square.json", "regularity_square.jsonl", 0},     {"spray_example71.json", "spray_example71.jsonl", 0},
      {"probe_oneforms.json", "probe_oneforms.jsonl", 0},           {"domain_violation.json", "domain_violation.jsonl", 3},
  };
  int identical = 0, matched = 0;
  for (const auto& c : cases) {
    const fs::path a = root / "a", b = root / "b";
    const int ra = run_cli(dir + "/" + c.file, a), rb = run_cli(dir + "/" + c.file, b);
    const std::string sa = slurp(a / c.report), sb = slurp(b / c.report);
    const bool same = !sa.empty() && sa == sb && ra == rb;
    identical += same ? 1 : 0;
    o.require(same, c.file + ": reports differ between identical runs");
    int from_summary = -1;
    if (!sa.empty()) {
      const auto s = summary_of(sa);
      from_summary = s.at("partial").get<bool>() ? 3 : (s.at("pass").get<bool>() ? 0 : 1);
    }
    const bool ok = ra == c.expect && ra == from_summary;
    matched += ok ? 1 : 0;
    o.require(ok, c.file + ": exit " + std::to_string(ra) + ", summary implies " + std::to_string(from_summary) + ", expected " + std::to_string(c.expect));
  }
  o.note(std::to_string(identical) + "/" + std::to_string(cases.size()) + " configs byte-identical across runs; " + std::to_string(matched) +
         " exit statuses match their summaries");

  // verdict failure and parse errors
  fs::create_directories(root);
  const fs::path bad = root / "expect_wrong.json";
  std::ofstream(bad) << R"({"command": "check-douglas", "dimension": 3, "metric": {"catalog": "perturbed_conformal"}, "sample": {"count": 3, "region": {"min_radius": 0.4}}})";
  const int rc_fail = run_cli(bad.string(), root / "c");
  o.require(rc_fail == 1, "failing verdicts exit " + std::to_string(rc_fail));
  const fs::path broken = root / "broken.json";
  std::ofstream(broken) << "{ \"command\": ";
  const int rc_parse = run_cli(broken.string(), root / "c");
  o.require(rc_parse == 2, "parse error exit " + std::to_string(rc_parse));
  o.note("failing verdicts exit " + std::to_string(rc_fail) + ", malformed config exits " + std::to_string(rc_parse));
  std::error_code ec;
  fs::remove_all(root, ec);
  return o;
}

}  // namespace

int main()
{
  const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,  criterion_6,
                                                       criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%.1fs)\n", o.pass ? "PASS" : "FAIL", k + 1, secs);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
