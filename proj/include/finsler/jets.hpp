#pragma once

/**
 * @file jets.hpp
 * @brief Truncated multivariate Taylor arithmetic over base-point (x) and fiber (y) variables.
 *
 * A JetValue stores the Taylor coefficients of a scalar function of 2n variables
 * (x^1..x^n, y^1..y^n) around a point, truncated to total x-degree <= x_order and
 * total y-degree <= y_order. The truncation is an ideal of the polynomial ring, so
 * every operation below is exact within the stored orders: no discretization error,
 * only floating-point rounding.
 *
 * Storage is dense. The practical ceiling is n <= 8 (exponents are packed four bits
 * per variable); desk-scale work uses n <= 4.
 */

#include "finsler/errors.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace finsler {

inline constexpr int kMaxJetDimension = 8;
inline constexpr int kMaxXOrder = 2;
// Four y-derivatives are needed by the Douglas tensor. The direct spray route
// differentiates F^2 twice more before reaching G, hence the headroom.
inline constexpr int kMaxYOrder = 6;

struct JetSpec
{
  int n = 2;
  int x_order = 0;
  int y_order = 0;

  void validate() const
  {
    if (n < 2 || n > kMaxJetDimension)
      throw DomainError("JetSpec", n, "dimension must lie in [2, 8]");
    if (x_order < 0 || x_order > kMaxXOrder)
      throw DomainError("JetSpec", x_order, "x_order must lie in [0, 2]");
    if (y_order < 0 || y_order > kMaxYOrder)
      throw DomainError("JetSpec", y_order, "y_order must lie in [0, 6]");
  }

  friend bool operator==(const JetSpec&, const JetSpec&) = default;
};

enum class VarKind { x, y };

/// One differentiation slot: x^index or y^index.
struct Var
{
  VarKind kind;
  int index;
};

inline Var dx(int i) { return {VarKind::x, i}; }
inline Var dy(int i) { return {VarKind::y, i}; }

namespace detail {

using Exponents = std::array<std::uint8_t, 2 * kMaxJetDimension>;

inline std::uint64_t pack(const Exponents& e)
{
  std::uint64_t key = 0;
  for (std::size_t v = 0; v < e.size(); ++v) key |= static_cast<std::uint64_t>(e[v]) << (4 * v);
  return key;
}

}  // namespace detail

/// Monomial enumeration and the sparse multiplication table for one JetSpec.
/// Layouts are interned: one immutable instance per spec, shared by all values.
class JetLayout
{
public:
  struct Monomial
  {
    detail::Exponents exps{};
    int x_degree = 0;
    int y_degree = 0;
    double factorial = 1.0;  // prod_v exps[v]!, converts Taylor coefficients to partials
  };

  struct Product
  {
    int lhs;
    int rhs;
    int out;
  };

  static std::shared_ptr<const JetLayout> get(const JetSpec& spec)
  {
    spec.validate();
    static std::mutex mutex;
    static std::map<std::tuple<int, int, int>, std::shared_ptr<const JetLayout>> cache;
    const std::lock_guard lock(mutex);
    auto& slot = cache[{spec.n, spec.x_order, spec.y_order}];
    if (!slot) slot = std::shared_ptr<const JetLayout>(new JetLayout(spec));
    return slot;
  }

  const JetSpec& spec() const noexcept { return spec_; }
  int size() const noexcept { return static_cast<int>(monomials_.size()); }
  int max_degree() const noexcept { return spec_.x_order + spec_.y_order; }
  const Monomial& monomial(int i) const { return monomials_[static_cast<std::size_t>(i)]; }
  const std::vector<Product>& products() const noexcept { return products_; }

  /// Index of the monomial with the given exponents, or -1 when it is truncated away.
  int find(const detail::Exponents& e) const
  {
    auto it = index_.find(detail::pack(e));
    return it == index_.end() ? -1 : it->second;
  }

  int slot(Var v) const
  {
    if (v.index < 0 || v.index >= spec_.n)
      throw DomainError("jet variable index", v.index, "index out of range for dimension " + std::to_string(spec_.n));
    return v.kind == VarKind::x ? v.index : spec_.n + v.index;
  }

private:
  explicit JetLayout(const JetSpec& spec) : spec_(spec)
  {
    const int n = spec.n;
    // Enumerate x-part and y-part exponents separately, then take products,
    // ordered by total degree so index 0 is the constant term.
    auto enumerate = [n](int max_deg) {
      std::vector<std::vector<std::uint8_t>> out;
      std::vector<std::uint8_t> cur(static_cast<std::size_t>(n), 0);
      for (int deg = 0; deg <= max_deg; ++deg) {
        auto rec = [&](auto&& self, int var, int left) -> void {
          if (var == n - 1) {
            cur[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(left);
            out.push_back(cur);
            return;
          }
          for (int k = left; k >= 0; --k) {
            cur[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(k);
            self(self, var + 1, left - k);
          }
        };
        rec(rec, 0, deg);
      }
      return out;
    };
    const auto xs = enumerate(spec.x_order);
    const auto ys = enumerate(spec.y_order);
    for (int total = 0; total <= spec.x_order + spec.y_order; ++total) {
      for (const auto& xe : xs) {
        int xd = 0;
        for (auto e : xe) xd += e;
        for (const auto& ye : ys) {
          int yd = 0;
          for (auto e : ye) yd += e;
          if (xd + yd != total) continue;
          Monomial m;
          for (int v = 0; v < n; ++v) {
            m.exps[static_cast<std::size_t>(v)] = xe[static_cast<std::size_t>(v)];
            m.exps[static_cast<std::size_t>(n + v)] = ye[static_cast<std::size_t>(v)];
          }
          m.x_degree = xd;
          m.y_degree = yd;
          for (auto e : m.exps)
            for (int k = 2; k <= e; ++k) m.factorial *= k;
          index_.emplace(detail::pack(m.exps), static_cast<int>(monomials_.size()));
          monomials_.push_back(m);
        }
      }
    }
    for (int i = 0; i < size(); ++i) {
      const auto& a = monomials_[static_cast<std::size_t>(i)];
      for (int j = 0; j < size(); ++j) {
        const auto& b = monomials_[static_cast<std::size_t>(j)];
        if (a.x_degree + b.x_degree > spec.x_order || a.y_degree + b.y_degree > spec.y_order) continue;
        detail::Exponents e{};
        for (std::size_t v = 0; v < e.size(); ++v) e[v] = static_cast<std::uint8_t>(a.exps[v] + b.exps[v]);
        products_.push_back({i, j, find(e)});
      }
    }
  }

  JetSpec spec_;
  std::vector<Monomial> monomials_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<Product> products_;
};

class JetValue
{
public:
  JetValue() = default;

  static JetValue constant(const JetSpec& spec, double value)
  {
    JetValue j(JetLayout::get(spec));
    j.coeffs_[0] = value;
    return j;
  }

  /// Seed jet for a coordinate: value in the constant slot, unit first derivative in its own slot.
  static JetValue variable(const JetSpec& spec, Var var, double value)
  {
    JetValue j(JetLayout::get(spec));
    j.coeffs_[0] = value;
    const int s = j.layout_->slot(var);
    const int order = var.kind == VarKind::x ? spec.x_order : spec.y_order;
    if (order > 0) {
      detail::Exponents e{};
      e[static_cast<std::size_t>(s)] = 1;
      j.coeffs_[static_cast<std::size_t>(j.layout_->find(e))] = 1.0;
    }
    return j;
  }

  bool empty() const noexcept { return !layout_; }
  const JetSpec& spec() const { return layout().spec(); }
  const JetLayout& layout() const
  {
    if (!layout_) throw Error("use of an uninitialized JetValue");
    return *layout_;
  }
  const std::shared_ptr<const JetLayout>& layout_ptr() const noexcept { return layout_; }

  double value() const { return coeffs_.at(0); }
  std::span<const double> coefficients() const noexcept { return coeffs_; }
  std::span<double> coefficients() noexcept { return coeffs_; }

  /// Partial derivative in the listed slots (repetition = higher order), evaluated at the base point.
  double partial(std::span<const Var> vars) const
  {
    const auto& lay = layout();
    detail::Exponents e{};
    for (const auto& v : vars) ++e[static_cast<std::size_t>(lay.slot(v))];
    const int idx = lay.find(e);
    if (idx < 0) throw DomainError("JetValue::partial", static_cast<double>(vars.size()), "derivative order exceeds the jet spec");
    return coeffs_[static_cast<std::size_t>(idx)] * lay.monomial(idx).factorial;
  }
  double partial(std::initializer_list<Var> vars) const { return partial(std::span<const Var>(vars.begin(), vars.size())); }

  /// Exact derivative as a jet of one lower order in the differentiated group.
  JetValue derivative(Var var) const
  {
    const auto& lay = layout();
    JetSpec target = lay.spec();
    int& order = var.kind == VarKind::x ? target.x_order : target.y_order;
    if (order == 0) throw DomainError("JetValue::derivative", 0.0, "no order left to differentiate");
    --order;
    JetValue out(JetLayout::get(target));
    const auto s = static_cast<std::size_t>(lay.slot(var));
    for (int i = 0; i < lay.size(); ++i) {
      auto e = lay.monomial(i).exps;
      if (e[s] == 0) continue;
      const double mult = e[s];
      --e[s];
      const int k = out.layout_->find(e);
      if (k >= 0) out.coeffs_[static_cast<std::size_t>(k)] = mult * coeffs_[static_cast<std::size_t>(i)];
    }
    return out;
  }

  /// Truncate to a spec with the same dimension and no larger orders.
  JetValue restrict_to(const JetSpec& target) const
  {
    const auto& lay = layout();
    if (target.n != lay.spec().n || target.x_order > lay.spec().x_order || target.y_order > lay.spec().y_order)
      throw Error("JetValue::restrict_to: target spec is not a truncation of the source");
    JetValue out(JetLayout::get(target));
    for (int k = 0; k < out.layout_->size(); ++k)
      out.coeffs_[static_cast<std::size_t>(k)] = coeffs_[static_cast<std::size_t>(lay.find(out.layout_->monomial(k).exps))];
    return out;
  }

  JetValue operator-() const
  {
    JetValue r = *this;
    for (auto& c : r.coeffs_) c = -c;
    return r;
  }

  JetValue& operator+=(const JetValue& o)
  {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  JetValue& operator-=(const JetValue& o)
  {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  JetValue& operator*=(const JetValue& o)
  {
    *this = *this * o;
    return *this;
  }
  JetValue& operator/=(const JetValue& o)
  {
    *this = *this / o;
    return *this;
  }
  JetValue& operator+=(double s)
  {
    layout();
    coeffs_[0] += s;
    return *this;
  }
  JetValue& operator-=(double s) { return *this += -s; }
  JetValue& operator*=(double s)
  {
    layout();
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  JetValue& operator/=(double s)
  {
    if (s == 0.0) throw DomainError("div", s, "division by zero");
    layout();
    for (auto& c : coeffs_) c /= s;
    return *this;
  }

  friend JetValue operator+(JetValue a, const JetValue& b) { return a += b; }
  friend JetValue operator-(JetValue a, const JetValue& b) { return a -= b; }
  friend JetValue operator+(JetValue a, double s) { return a += s; }
  friend JetValue operator+(double s, JetValue a) { return a += s; }
  friend JetValue operator-(JetValue a, double s) { return a -= s; }
  friend JetValue operator-(double s, const JetValue& a) { return (-a) += s; }
  friend JetValue operator*(JetValue a, double s) { return a *= s; }
  friend JetValue operator*(double s, JetValue a) { return a *= s; }
  friend JetValue operator/(JetValue a, double s) { return a /= s; }

  friend JetValue operator*(const JetValue& a, const JetValue& b)
  {
    a.check_same(b);
    JetValue r(a.layout_);
    const auto& ac = a.coeffs_;
    const auto& bc = b.coeffs_;
    auto& rc = r.coeffs_;
    for (const auto& p : a.layout_->products())
      rc[static_cast<std::size_t>(p.out)] += ac[static_cast<std::size_t>(p.lhs)] * bc[static_cast<std::size_t>(p.rhs)];
    return r;
  }

  friend JetValue operator/(const JetValue& a, const JetValue& b)
  {
    a.check_same(b);
    return a * reciprocal(b);
  }
  friend JetValue operator/(double s, const JetValue& b) { return reciprocal(b) * s; }

  /// f(u) for a univariate f given by its Taylor coefficients at u.value():
  /// taylor[k] = f^(k)(u0) / k!. Coefficients beyond the jet's total degree are ignored.
  friend JetValue compose(const JetValue& u, std::span<const double> taylor)
  {
    const int K = u.layout().max_degree();
    if (static_cast<int>(taylor.size()) < K + 1)
      throw Error("compose: Taylor series shorter than the jet's total degree");
    JetValue h = u;
    h.coeffs_[0] = 0.0;
    JetValue r = JetValue(u.layout_);
    r.coeffs_[0] = taylor[static_cast<std::size_t>(K)];
    for (int k = K - 1; k >= 0; --k) {
      r = r * h;
      r.coeffs_[0] += taylor[static_cast<std::size_t>(k)];
    }
    return r;
  }

  friend JetValue reciprocal(const JetValue& u)
  {
    const double u0 = u.value();
    if (u0 == 0.0) throw DomainError("div", u0, "denominator value is zero");
    const int K = u.layout().max_degree();
    std::vector<double> t(static_cast<std::size_t>(K + 1));
    double p = 1.0 / u0;
    for (int k = 0; k <= K; ++k) {
      t[static_cast<std::size_t>(k)] = p;
      p *= -1.0 / u0;
    }
    return compose(u, t);
  }

  friend JetValue sqrt(const JetValue& u)
  {
    const double u0 = u.value();
    if (!(u0 > 0.0)) throw DomainError("sqrt", u0, "argument must be positive");
    return power_series(u, 0.5);
  }

  friend JetValue exp(const JetValue& u)
  {
    const int K = u.layout().max_degree();
    std::vector<double> t(static_cast<std::size_t>(K + 1));
    const double e0 = std::exp(u.value());
    double inv_fact = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k > 0) inv_fact /= k;
      t[static_cast<std::size_t>(k)] = e0 * inv_fact;
    }
    return compose(u, t);
  }

  friend JetValue log(const JetValue& u)
  {
    const double u0 = u.value();
    if (!(u0 > 0.0)) throw DomainError("ln", u0, "argument must be positive");
    const int K = u.layout().max_degree();
    std::vector<double> t(static_cast<std::size_t>(K + 1));
    t[0] = std::log(u0);
    double p = 1.0;
    for (int k = 1; k <= K; ++k) {
      p /= u0;
      t[static_cast<std::size_t>(k)] = ((k % 2 == 1) ? 1.0 : -1.0) * p / k;
    }
    return compose(u, t);
  }

  /// u^(p/q) for a positive base, routed through exp(q ln u) so every real
  /// power shares the same chain-rule path.
  friend JetValue pow(const JetValue& u, int num, int den)
  {
    if (den == 0) throw DomainError("pow", 0.0, "zero denominator in rational exponent");
    return pow(u, static_cast<double>(num) / static_cast<double>(den));
  }
  friend JetValue pow(const JetValue& u, double q)
  {
    const double u0 = u.value();
    if (!(u0 > 0.0)) throw DomainError("pow", u0, "base must be positive for a real exponent");
    return exp(log(u) * q);
  }

  /// Integer power by repeated squaring; any nonzero base (zero base only for k >= 0).
  friend JetValue ipow(const JetValue& u, int k)
  {
    if (k < 0) return ipow(reciprocal(u), -k);
    JetValue r = JetValue::constant(u.spec(), 1.0);
    JetValue b = u;
    while (k > 0) {
      if (k & 1) r = r * b;
      k >>= 1;
      if (k) b = b * b;
    }
    return r;
  }

private:
  explicit JetValue(std::shared_ptr<const JetLayout> layout)
    : layout_(std::move(layout)), coeffs_(static_cast<std::size_t>(layout_->size()), 0.0)
  {}

  void check_same(const JetValue& o) const
  {
    if (!layout_ || !o.layout_) throw Error("use of an uninitialized JetValue");
    if (layout_ != o.layout_) throw Error("jet spec mismatch between operands");
  }

  // (u0 + h)^q = u0^q * sum_k binom(q, k) (h/u0)^k
  static JetValue power_series(const JetValue& u, double q)
  {
    const double u0 = u.value();
    const int K = u.layout().max_degree();
    std::vector<double> t(static_cast<std::size_t>(K + 1));
    double c = std::pow(u0, q);
    for (int k = 0; k <= K; ++k) {
      t[static_cast<std::size_t>(k)] = c;
      c *= (q - k) / ((k + 1) * u0);
    }
    return compose(u, t);
  }

  std::shared_ptr<const JetLayout> layout_;
  std::vector<double> coeffs_;
};

/// Convenience: seed the n x-coordinates (or y-coordinates) of a point.
inline std::vector<JetValue> seed_point(const JetSpec& spec, VarKind kind, std::span<const double> point)
{
  if (static_cast<int>(point.size()) != spec.n)
    throw DomainError("seed_point", static_cast<double>(point.size()), "point dimension does not match the jet spec");
  std::vector<JetValue> out;
  out.reserve(point.size());
  for (int i = 0; i < spec.n; ++i) out.push_back(JetValue::variable(spec, {kind, i}, point[static_cast<std::size_t>(i)]));
  return out;
}

inline std::vector<JetValue> restrict_all(std::span<const JetValue> values, const JetSpec& target)
{
  std::vector<JetValue> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.restrict_to(target));
  return out;
}

}  // namespace finsler
