#pragma once

/**
 * @file gab.hpp
 * @brief General (alpha, beta)-metrics F = alpha phi(b^2, beta/alpha): sprays, fundamental
 * tensor, regularity diagnostics, geodesics and indicatrix sampling.
 *
 * Two spray routes exist. The structural route assembles G^i from the alpha-spray,
 * the six phi-ingredients Q, R, Theta, Psi, Pi, Omega and the r/s contractions of beta.
 * The direct route evaluates G^i = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l}) with
 * mixed jets and works for any metric with invertible g_ij, including closed forms.
 */

#include "finsler/errors.hpp"
#include "finsler/fields.hpp"
#include "finsler/jets.hpp"
#include "finsler/linalg.hpp"
#include "finsler/riemann.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace finsler {

/// Default half-width of the guard band around the singular cone, in s-units.
inline constexpr double kConeGuard = 1e-6;

struct PhiModel
{
  using Fn = std::function<JetValue(const JetValue& b2, const JetValue& s)>;

  std::string name;
  Fn phi, phi1, phi2, phi22, phi12;
  // phi(b^2, s) = (b + s)^2: vanishes at s = -b, degenerate at s = +-b.
  bool singular_square = false;
};

/// phi = (1 + s)^2, the regular square metric (alpha + beta)^2 / alpha.
inline PhiModel phi_square_regular()
{
  return {"square",
          [](const JetValue&, const JetValue& s) { return (1.0 + s) * (1.0 + s); },
          [](const JetValue&, const JetValue& s) { return s * 0.0; },
          [](const JetValue&, const JetValue& s) { return (1.0 + s) * 2.0; },
          [](const JetValue&, const JetValue& s) { return s * 0.0 + 2.0; },
          [](const JetValue&, const JetValue& s) { return s * 0.0; },
          false};
}

/// phi = (b + s)^2 with b = sqrt(b^2), the singular square metric (b alpha + beta)^2 / alpha.
inline PhiModel phi_square_singular()
{
  auto root = [](const JetValue& b2) {
    if (!(b2.value() > 0.0)) throw DomainError("singular square phi", b2.value(), "b^2 must be positive");
    return sqrt(b2);
  };
  return {"singular_square",
          [root](const JetValue& b2, const JetValue& s) {
            const JetValue u = root(b2) + s;
            return u * u;
          },
          [root](const JetValue& b2, const JetValue& s) {
            const JetValue b = root(b2);
            return (b + s) / b;
          },
          [root](const JetValue& b2, const JetValue& s) { return (root(b2) + s) * 2.0; },
          [](const JetValue&, const JetValue& s) { return s * 0.0 + 2.0; },
          [root](const JetValue& b2, const JetValue& s) { return s * 0.0 + reciprocal(root(b2)); },
          true};
}

/// phi = 1: F = alpha, the Riemannian case.
inline PhiModel phi_riemannian()
{
  auto zero = [](const JetValue&, const JetValue& s) { return s * 0.0; };
  return {"riemannian", [](const JetValue&, const JetValue& s) { return s * 0.0 + 1.0; }, zero, zero, zero, zero, false};
}

/// phi = 1 + s: Randers-type, phi_22 = 0.
inline PhiModel phi_randers()
{
  auto zero = [](const JetValue&, const JetValue& s) { return s * 0.0; };
  return {"randers", [](const JetValue&, const JetValue& s) { return 1.0 + s; }, zero,
          [](const JetValue&, const JetValue& s) { return s * 0.0 + 1.0; }, zero, zero, false};
}

template <class T>
struct SprayIngredientsT
{
  T Q, R, Theta, Psi, Pi, Omega;
};

using SprayIngredients = SprayIngredientsT<double>;

namespace detail {

inline void guard_cone(const PhiModel& phi, double b2, double s, double eps)
{
  if (phi.singular_square) {
    const double b = std::sqrt(b2);
    if (std::min(std::abs(b - s), std::abs(b + s)) < eps)
      throw SingularDirection("y lies within " + std::to_string(eps) + " of the singular cone s = +-b");
  }
}

}  // namespace detail

/// Q, R, Theta, Psi, Pi, Omega as jets in (b^2, s).
inline SprayIngredientsT<JetValue> spray_ingredients(const PhiModel& phi, const JetValue& b2, const JetValue& s, double eps = kConeGuard)
{
  detail::guard_cone(phi, b2.value(), s.value(), eps);
  const JetValue p = phi.phi(b2, s);
  const JetValue p1 = phi.phi1(b2, s);
  const JetValue p2 = phi.phi2(b2, s);
  const JetValue p22 = phi.phi22(b2, s);
  const JetValue p12 = phi.phi12(b2, s);
  const JetValue first = p - s * p2;
  const JetValue second = first + (b2 - s * s) * p22;
  if (std::abs(first.value()) < eps)
    throw SingularDirection("phi - s phi_2 vanishes (value " + std::to_string(first.value()) + ")");
  if (std::abs(second.value()) < eps)
    throw SingularDirection("phi - s phi_2 + (b^2 - s^2) phi_22 vanishes (value " + std::to_string(second.value()) + ")");
  if (std::abs(p.value()) < eps) throw SingularDirection("phi vanishes (value " + std::to_string(p.value()) + ")");
  SprayIngredientsT<JetValue> g;
  g.Q = p2 / first;
  g.R = p1 / first;
  g.Theta = (first * p2 - s * p * p22) / (p * second * 2.0);
  g.Psi = p22 / (second * 2.0);
  g.Pi = (first * p12 - s * p1 * p22) / (first * second);
  g.Omega = p1 * 2.0 / p - (s * p + (b2 - s * s) * p2) / p * g.Pi;
  return g;
}

inline SprayIngredients spray_ingredients(const PhiModel& phi, double b2, double s, double eps = kConeGuard)
{
  const JetSpec spec{2, 0, 0};
  const auto g = spray_ingredients(phi, JetValue::constant(spec, b2), JetValue::constant(spec, s), eps);
  return {g.Q.value(), g.R.value(), g.Theta.value(), g.Psi.value(), g.Pi.value(), g.Omega.value()};
}

/// A Finsler metric: either an (alpha, beta) pair with a phi-model, or a closed form.
class FinslerMetric
{
public:
  static FinslerMetric alpha_beta(FieldPair pair, PhiModel phi)
  {
    FinslerMetric m;
    m.n_ = pair.dimension();
    m.name_ = pair.name + "/" + phi.name;
    m.impl_ = AlphaBeta{std::move(pair), std::move(phi)};
    return m;
  }

  static FinslerMetric closed_form(ClosedFormMetric f)
  {
    FinslerMetric m;
    m.n_ = f.n;
    m.name_ = f.name;
    m.impl_ = std::move(f);
    return m;
  }

  int dimension() const noexcept { return n_; }
  const std::string& name() const noexcept { return name_; }
  bool is_alpha_beta() const noexcept { return std::holds_alternative<AlphaBeta>(impl_); }
  const FieldPair& pair() const { return std::get<AlphaBeta>(impl_).pair; }
  const PhiModel& phi() const { return std::get<AlphaBeta>(impl_).phi; }

  bool contains(std::span<const double> x) const
  {
    if (const auto* ab = std::get_if<AlphaBeta>(&impl_)) return ab->pair.contains(x);
    const auto& cf = std::get<ClosedFormMetric>(impl_);
    return !cf.domain || cf.domain(x);
  }

  /// F on jets; x and y must share one spec.
  JetValue evaluate(std::span<const JetValue> x, std::span<const JetValue> y) const
  {
    if (const auto* ab = std::get_if<AlphaBeta>(&impl_)) {
      const JetMatrix a = ab->pair.alpha(x);
      const std::vector<JetValue> b = ab->pair.beta(x);
      const JetValue b2 = beta_norm_squared(a, b);
      const JetValue alpha = sqrt(bilinear(a, y, y));
      const JetValue s = dot(b, y) / alpha;
      return alpha * ab->phi.phi(b2, s);
    }
    return std::get<ClosedFormMetric>(impl_).eval(x, y);
  }

  double operator()(std::span<const double> x, std::span<const double> y) const
  {
    const JetSpec spec{n_, 0, 0};
    return evaluate(constant_vector(spec, x), constant_vector(spec, y)).value();
  }

private:
  struct AlphaBeta
  {
    FieldPair pair;
    PhiModel phi;
  };

  int n_ = 0;
  std::string name_;
  std::variant<AlphaBeta, ClosedFormMetric> impl_;
};

inline FinslerMetric riemannian_metric(FieldPair pair) { return FinslerMetric::alpha_beta(std::move(pair), phi_riemannian()); }

/// Structural route: G^i from the alpha-spray, the phi-ingredients and the beta contractions.
/// y carries jets in the fiber variables only.
inline std::vector<JetValue> spray_structural(const PhiModel& phi, const BetaDerived& d, std::span<const JetValue> y, double eps = kConeGuard)
{
  const int n = d.n;
  const JetSpec spec = y[0].spec();
  const JetValue alpha = sqrt(d.alpha_squared(y));
  const JetValue beta = d.beta(y);
  const JetValue s = beta / alpha;
  const JetValue b2 = JetValue::constant(spec, d.b2);
  const auto g = spray_ingredients(phi, b2, s, eps);

  const JetValue r00 = d.r00(y);
  const JetValue r0 = d.r0(y);
  const JetValue s0 = d.s0(y);
  const auto su0 = d.s_up_0(y);
  const auto base = d.gamma.alpha_spray(y);
  const JetValue a2 = alpha * alpha;

  const JetValue common = alpha * g.Q * s0 * -2.0 + r00 + a2 * g.R * (2.0 * d.r_scalar);
  const JetValue rs0 = r0 + s0;
  const JetValue along_y = (g.Theta * common + alpha * g.Omega * rs0) / alpha;
  const JetValue along_b = g.Psi * common + alpha * g.Pi * rs0;
  const JetValue aQ = alpha * g.Q;
  const JetValue a2R = a2 * g.R;

  std::vector<JetValue> G;
  G.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    G.push_back(base[ui] + aQ * su0[ui] + along_y * y[ui] + along_b * d.b_up(i) - a2R * (d.r_up(i) + d.s_up(i)));
  }
  return G;
}

/// Direct route: 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l}), returned as jets of
/// order y_order in the fiber variables.
inline std::vector<JetValue> spray_direct(const FinslerMetric& metric, std::span<const double> x, std::span<const double> y, int y_order)
{
  const int n = metric.dimension();
  const JetSpec work{n, 1, y_order + 2};
  const JetSpec target{n, 0, y_order};
  const auto xs = seed_point(work, VarKind::x, x);
  const auto ys = seed_point(work, VarKind::y, y);
  const JetValue F = metric.evaluate(xs, ys);
  const JetValue F2 = F * F;

  JetMatrix g(n, target);
  std::vector<JetValue> rhs;
  const auto yt = seed_point(target, VarKind::y, y);
  for (int l = 0; l < n; ++l) {
    const JetValue Fyl = F2.derivative(dy(l));
    for (int i = 0; i < n; ++i) g(i, l) = Fyl.derivative(dy(i)).restrict_to(target) * 0.5;
    JetValue acc = -F2.derivative(dx(l)).restrict_to(target);
    for (int k = 0; k < n; ++k) acc += Fyl.derivative(dx(k)).restrict_to(target) * yt[static_cast<std::size_t>(k)];
    rhs.push_back(acc);
  }
  const JetMatrix ginv = inverse(g);
  std::vector<JetValue> G;
  for (int i = 0; i < n; ++i) {
    JetValue acc = JetValue::constant(target, 0.0);
    for (int l = 0; l < n; ++l) acc += ginv(i, l) * rhs[static_cast<std::size_t>(l)];
    G.push_back(acc * 0.25);
  }
  return G;
}

enum class SprayRoute { automatic, structural, direct };

/// Spray coefficients as fiber jets of the requested order. The automatic route uses the
/// structural formula for (alpha, beta)-metrics and the direct formula otherwise.
inline std::vector<JetValue> spray_jets(const FinslerMetric& metric, std::span<const double> x, std::span<const double> y, int y_order,
                                        SprayRoute route = SprayRoute::automatic, double eps = kConeGuard)
{
  if (!metric.contains(x)) throw DomainError("spray: metric '" + metric.name() + "'", x.empty() ? 0.0 : x[0], "point outside the domain");
  bool all_zero = true;
  for (double v : y) all_zero = all_zero && v == 0.0;
  if (all_zero) throw DomainError("spray", 0.0, "y must be nonzero");
  if (route == SprayRoute::automatic) route = metric.is_alpha_beta() ? SprayRoute::structural : SprayRoute::direct;
  if (route == SprayRoute::structural) {
    if (!metric.is_alpha_beta()) throw PreconditionError("structural spray route requires an (alpha, beta)-metric");
    const BetaDerived d = beta_derived(metric.pair(), x);
    const JetSpec spec{metric.dimension(), 0, y_order};
    return spray_structural(metric.phi(), d, seed_point(spec, VarKind::y, y), eps);
  }
  if (metric.is_alpha_beta()) {
    const BetaDerived d = beta_derived(metric.pair(), x);
    const double s = d.beta(y) / std::sqrt(d.alpha_squared(y));
    detail::guard_cone(metric.phi(), d.b2, s, eps);
  }
  return spray_direct(metric, x, y, y_order);
}

inline std::vector<double> spray(const FinslerMetric& metric, std::span<const double> x, std::span<const double> y,
                                 SprayRoute route = SprayRoute::automatic, double eps = kConeGuard)
{
  const auto G = spray_jets(metric, x, y, 0, route, eps);
  std::vector<double> out;
  for (const auto& g : G) out.push_back(g.value());
  return out;
}

/// g_ij = 1/2 [F^2]_{y^i y^j}
inline MatrixXd fundamental_tensor(const FinslerMetric& metric, std::span<const double> x, std::span<const double> y)
{
  const int n = metric.dimension();
  const JetSpec spec{n, 0, 2};
  const JetValue F = metric.evaluate(constant_vector(spec, x), seed_point(spec, VarKind::y, y));
  const JetValue F2 = F * F;
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * F2.partial({dy(i), dy(j)});
  return g;
}

struct RegularityReport
{
  double min_first = 0.0;   // min_s (phi - s phi_2)
  double argmin_first = 0.0;
  double min_second = 0.0;  // min_s (phi - s phi_2 + (b^2 - s^2) phi_22)
  double argmin_second = 0.0;
  bool regular = false;     // both minima strictly positive
};

/// Scan both regularity expressions on `grid` equally spaced points of [-b, b].
inline RegularityReport regularity_scan(const PhiModel& phi, double b2, int grid)
{
  if (grid < 2) throw DomainError("regularity_scan", grid, "grid needs at least two points");
  if (!(b2 > 0.0)) throw DomainError("regularity_scan", b2, "b^2 must be positive");
  const double b = std::sqrt(b2);
  const JetSpec spec{2, 0, 0};
  const JetValue jb2 = JetValue::constant(spec, b2);
  RegularityReport rep;
  rep.min_first = rep.min_second = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid; ++k) {
    const double s = (k == grid - 1) ? b : -b + 2.0 * b * k / (grid - 1);
    const JetValue js = JetValue::constant(spec, s);
    const double first = (phi.phi(jb2, js) - js * phi.phi2(jb2, js)).value();
    const double second = first + (b2 - s * s) * phi.phi22(jb2, js).value();
    if (first < rep.min_first) {
      rep.min_first = first;
      rep.argmin_first = s;
    }
    if (second < rep.min_second) {
      rep.min_second = second;
      rep.argmin_second = s;
    }
  }
  rep.regular = rep.min_first > 0.0 && rep.min_second > 0.0;
  return rep;
}

struct GeodesicOptions
{
  double t_end = 1.0;
  double step = 1e-3;
  /// Optional early stop, checked after each step (e.g. "left the ball of radius 0.9").
  std::function<bool(std::span<const double>)> stop;
  SprayRoute route = SprayRoute::automatic;
};

struct TrajectoryPoint
{
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;
};

enum class Termination { completed, stopped, domain_exit, singular };

inline const char* to_string(Termination t)
{
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::stopped: return "stopped";
    case Termination::domain_exit: return "domain_exit";
    case Termination::singular: return "singular";
  }
  return "?";
}

struct Trajectory
{
  std::vector<TrajectoryPoint> points;
  Termination termination = Termination::completed;
  bool truncated = false;  // a singular direction interrupted the integration
  double chord_deviation = 0.0;
};

/// Max Euclidean distance of the sample points from the line through the first and last point.
inline double chord_deviation(const std::vector<TrajectoryPoint>& pts)
{
  if (pts.size() < 3) return 0.0;
  const VectorXd p0 = to_eigen(pts.front().x);
  const VectorXd dir = to_eigen(pts.back().x) - p0;
  const double len = dir.norm();
  if (len == 0.0) return 0.0;
  const VectorXd u = dir / len;
  double dev = 0.0;
  for (const auto& p : pts) {
    const VectorXd w = to_eigen(p.x) - p0;
    dev = std::max(dev, (w - w.dot(u) * u).norm());
  }
  return dev;
}

/// Classical RK4 on x' = v, v' = -2 G(x, v), fixed step.
inline Trajectory geodesic_integrate(const FinslerMetric& metric, std::span<const double> x0, std::span<const double> y0, const GeodesicOptions& opt)
{
  if (!(opt.step > 0.0)) throw DomainError("geodesic_integrate", opt.step, "step must be positive");
  if (!metric.contains(x0)) throw DomainError("geodesic_integrate", x0.empty() ? 0.0 : x0[0], "initial point outside the domain");
  const auto n = static_cast<Eigen::Index>(metric.dimension());
  auto accel = [&](const VectorXd& x, const VectorXd& v) -> VectorXd {
    const auto xs = to_std(x);
    if (!metric.contains(xs)) throw DomainError("geodesic stage", x(0), "left the domain");
    const auto vs = to_std(v);
    return -2.0 * to_eigen(spray(metric, xs, vs, opt.route));
  };

  Trajectory traj;
  VectorXd x = to_eigen(x0), v = to_eigen(y0);
  traj.points.push_back({0.0, to_std(x), to_std(v)});
  const auto steps = static_cast<long>(std::llround(opt.t_end / opt.step));
  for (long k = 0; k < steps; ++k) {
    const double h = opt.step;
    try {
      const VectorXd a1 = accel(x, v);
      const VectorXd k1x = v, k1v = a1;
      const VectorXd k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v);
      const VectorXd k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v);
      const VectorXd k4x = v + h * k3v, k4v = accel(x + h * k3x, v + h * k3v);
      const VectorXd xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      const VectorXd vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
      if (!metric.contains(to_std(xn))) {
        traj.termination = Termination::domain_exit;
        break;
      }
      x = xn;
      v = vn;
    } catch (const SingularDirection&) {
      traj.termination = Termination::singular;
      traj.truncated = true;
      break;
    } catch (const DomainError&) {
      traj.termination = Termination::domain_exit;
      break;
    }
    traj.points.push_back({static_cast<double>(k + 1) * opt.step, to_std(x), to_std(v)});
    if (opt.stop && opt.stop(traj.points.back().x)) {
      traj.termination = Termination::stopped;
      break;
    }
  }
  (void)n;
  traj.chord_deviation = chord_deviation(traj.points);
  return traj;
}

/// Self-convergence ratio |X_h - X_{h/2}| / |X_{h/2} - X_{h/4}| of the final state at
/// t_end; a fourth-order method gives about 16.
inline double self_convergence_ratio(const FinslerMetric& metric, std::span<const double> x0, std::span<const double> y0, double t_end, double step)
{
  auto final_state = [&](double h) {
    GeodesicOptions opt{t_end, h, {}, SprayRoute::automatic};
    const Trajectory tr = geodesic_integrate(metric, x0, y0, opt);
    if (tr.termination != Termination::completed) throw PreconditionError("convergence run did not reach t_end");
    VectorXd s(2 * metric.dimension());
    s << to_eigen(tr.points.back().x), to_eigen(tr.points.back().v);
    return s;
  };
  const VectorXd a = final_state(step), b = final_state(step / 2), c = final_state(step / 4);
  return (a - b).norm() / (b - c).norm();
}

struct IndicatrixSample
{
  double angle = 0.0;
  double y1 = 0.0, y2 = 0.0;
  double radius = 0.0;  // |y| with F(x, y) = 1; infinite when unbounded
  bool unbounded = false;
  double marker_value = 0.0;  // b alpha + beta for (alpha, beta)-metrics, F otherwise
};

/// Points of {y : F(x, y) = 1} along `count` equally spaced Euclidean directions.
/// Directions where F(x, e) < eps are reported as unbounded markers.
inline std::vector<IndicatrixSample> indicatrix_points(const FinslerMetric& metric, std::span<const double> x, int count, double eps = 1e-12)
{
  if (metric.dimension() != 2) throw PreconditionError("indicatrix sampling is planar (dimension 2)");
  if (count < 3) throw DomainError("indicatrix_points", count, "need at least three directions");
  if (!metric.contains(x)) throw DomainError("indicatrix_points", x[0], "point outside the domain");
  std::optional<BetaDerived> d;
  if (metric.is_alpha_beta()) d = beta_derived(metric.pair(), x);
  std::vector<IndicatrixSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * std::numbers::pi * k / count;
    const std::vector<double> e{std::cos(th), std::sin(th)};
    const double F = metric(x, e);
    IndicatrixSample smp;
    smp.angle = th;
    smp.marker_value = F;
    if (d) smp.marker_value = std::sqrt(d->b2) * std::sqrt(d->alpha_squared<double>(e)) + d->beta<double>(e);
    if (F < eps) {
      smp.unbounded = true;
      smp.radius = std::numeric_limits<double>::infinity();
    } else {
      smp.y1 = e[0] / F;
      smp.y2 = e[1] / F;
      smp.radius = 1.0 / F;
    }
    out.push_back(smp);
  }
  return out;
}

/// True when consecutive bounded indicatrix points turn consistently counter-clockwise.
inline bool indicatrix_is_convex(const std::vector<IndicatrixSample>& pts)
{
  const std::size_t m = pts.size();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& a = pts[k];
    const auto& b = pts[(k + 1) % m];
    const auto& c = pts[(k + 2) % m];
    if (a.unbounded || b.unbounded || c.unbounded) return false;
    const double cross = (b.y1 - a.y1) * (c.y2 - b.y2) - (b.y2 - a.y2) * (c.y1 - b.y1);
    if (!(cross > 0.0)) return false;
  }
  return true;
}

}  // namespace finsler
