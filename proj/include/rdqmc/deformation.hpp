#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace rdqmc {

using Vec2 = std::array<double, 2>;

/// 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  double det() const { return a * d - b * c; }
  Mat2 transpose() const { return {a, c, b, d}; }
  Mat2 inverse() const {
    const double dt = det();
    return {d / dt, -b / dt, -c / dt, a / dt};
  }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  Vec2 operator*(const Vec2& v) const { return {a * v[0] + b * v[1], c * v[0] + d * v[1]}; }
};

/// Singular values (smallest, largest) of a 2x2 matrix.
inline std::array<double, 2> singular_values(const Mat2& m) {
  const double fro2 = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  const double dt = std::abs(m.det());
  const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * dt * dt));
  const double smax = std::sqrt(0.5 * (fro2 + disc));
  const double smin = smax > 0.0 ? dt / smax : 0.0;
  return {smin, smax};
}

enum class XiKind { Linear, Exponential };

/// xi(y) = y, or exp(-1/(y+1/2)) with xi(-1/2) := 0.
inline double xi(XiKind kind, double y) {
  if (kind == XiKind::Linear) return y;
  const double t = y + 0.5;
  return t <= 0.0 ? 0.0 : std::exp(-1.0 / t);
}

/// V(x,y) = x + sum_j xi(y_j) psi_j(x),
/// psi_j(x) = j^{-theta} sin(3j(atan2(x1,x2) + pi)) x.
/// Terms j > active are evaluated at y_j = 0.
struct PerturbationField {
  XiKind kind = XiKind::Linear;
  double theta = 2.1;
  std::size_t s = 1;
  std::size_t active = 1;

  PerturbationField() = default;
  PerturbationField(XiKind k, double th, std::size_t dim) : kind(k), theta(th), s(dim), active(dim) {
    if (!(theta > 2.0)) throw ParameterError("decay exponent theta must exceed 2");
    if (s == 0) throw ParameterError("field dimension s must be >= 1");
  }

  /// E1..E4; theta <= 0 selects the experiment default.
  static PerturbationField experiment(const std::string& id, std::size_t s, double theta = 0.0) {
    XiKind k;
    double th;
    if (id == "E1") { k = XiKind::Linear; th = 2.1; }
    else if (id == "E2") { k = XiKind::Exponential; th = 2.1; }
    else if (id == "E3") { k = XiKind::Linear; th = 2.5; }
    else if (id == "E4") { k = XiKind::Exponential; th = 2.5; }
    else throw ParameterError("unknown experiment id '" + id + "'");
    return {k, theta > 0.0 ? theta : th, s};
  }

  /// xi(y_j) for j <= active, xi(0) beyond.
  std::vector<double> xi_values(std::span<const double> y) const {
    if (y.size() != s) throw ParameterError("parameter dimension does not match field dimension");
    std::vector<double> v(s);
    const double tail = xi(kind, 0.0);
    for (std::size_t j = 0; j < s; ++j) v[j] = j < active ? xi(kind, y[j]) : tail;
    return v;
  }
};

inline PerturbationField truncate(const PerturbationField& field, std::size_t s_trunc) {
  if (s_trunc < 1 || s_trunc > field.s) throw ParameterError("truncation dimension out of range");
  PerturbationField out = field;
  out.active = s_trunc;
  return out;
}

/// b_j = j^{1-theta}
inline std::vector<double> b_sequence(double theta, std::size_t s) {
  if (!(theta > 2.0)) throw ParameterError("decay exponent theta must exceed 2");
  std::vector<double> b(s);
  for (std::size_t j = 1; j <= s; ++j) b[j - 1] = std::pow(static_cast<double>(j), 1.0 - theta);
  return b;
}

inline std::string format_point(const Vec2& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << x[0] << ", " << x[1] << ")";
  return os.str();
}

namespace detail {

// Angular coefficient tables at a fixed point x:
//   sin_term[j] = j^{-theta} sin(alpha_j),
//   cos_term[j] = 3 j^{1-theta} cos(alpha_j),  alpha_j = 3j(atan2(x1,x2) + pi),
// together with x (grad phi)^T where phi = atan2(x1, x2).
struct AngularTable {
  Vec2 x{};
  Mat2 outer{0, 0, 0, 0};
  bool at_origin = false;
  std::vector<double> sin_term, cos_term;

  AngularTable(const Vec2& pt, double theta, std::size_t s)
      : x(pt), sin_term(s), cos_term(s) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    at_origin = r2 == 0.0;
    const double phi = std::atan2(x[0], x[1]);
    // d phi / d x1 = x2 / r^2, d phi / d x2 = -x1 / r^2
    if (!at_origin) {
      const Vec2 g{x[1] / r2, -x[0] / r2};
      outer = {x[0] * g[0], x[0] * g[1], x[1] * g[0], x[1] * g[1]};
    }
    for (std::size_t j = 1; j <= s; ++j) {
      const double alpha = 3.0 * static_cast<double>(j) * (phi + std::numbers::pi);
      const double jt = std::pow(static_cast<double>(j), -theta);
      sin_term[j - 1] = jt * std::sin(alpha);
      cos_term[j - 1] = 3.0 * static_cast<double>(j) * jt * std::cos(alpha);
    }
  }
};

}  // namespace detail

/// V, J and det J at one point. J = (1 + a) I + g x (grad phi)^T with
/// a = sum xi_j j^{-theta} sin(alpha_j), g = sum xi_j 3 j^{1-theta} cos(alpha_j).
struct FieldValue {
  Vec2 V{};
  Mat2 J{};
  double detJ = 1.0;
};

inline FieldValue evaluate_from_table(const detail::AngularTable& tab, std::span<const double> xis) {
  double a = 0.0, g = 0.0;
  bool any = false;
  for (std::size_t j = 0; j < xis.size(); ++j) {
    if (xis[j] == 0.0) continue;
    any = true;
    a += xis[j] * tab.sin_term[j];
    g += xis[j] * tab.cos_term[j];
  }
  if (any && tab.at_origin)
    throw OriginSingularity("origin singularity: Jacobian undefined at x = (0, 0)");
  FieldValue fv;
  fv.V = {tab.x[0] * (1.0 + a), tab.x[1] * (1.0 + a)};
  fv.J = {1.0 + a + g * tab.outer.a, g * tab.outer.b, g * tab.outer.c, 1.0 + a + g * tab.outer.d};
  fv.detJ = fv.J.det();
  return fv;
}

inline FieldValue evaluate(const PerturbationField& field, const Vec2& x, std::span<const double> y) {
  const auto xis = field.xi_values(y);
  return evaluate_from_table(detail::AngularTable(x, field.theta, field.s), xis);
}

inline Vec2 displacement(const PerturbationField& field, const Vec2& x, std::span<const double> y) {
  const auto xis = field.xi_values(y);
  const double phi = std::atan2(x[0], x[1]);
  double a = 0.0;
  for (std::size_t j = 1; j <= field.s; ++j) {
    if (xis[j - 1] == 0.0) continue;
    const double alpha = 3.0 * static_cast<double>(j) * (phi + std::numbers::pi);
    a += xis[j - 1] * std::pow(static_cast<double>(j), -field.theta) * std::sin(alpha);
  }
  return {x[0] * (1.0 + a), x[1] * (1.0 + a)};
}

inline Mat2 jacobian(const PerturbationField& field, const Vec2& x, std::span<const double> y) {
  return evaluate(field, x, y).J;
}

using ScalarFn = std::function<double(const Vec2&)>;

/// Pulled-back data at one point.
struct PullbackSample {
  Mat2 A{};
  double detJ = 1.0;
  double f_ref = 0.0;
  double u0_hat = 0.0;
};

/// A = (J^T J)^{-1} det J, f_ref = f(V) det J, u0_hat = u0(V).
inline PullbackSample pullback_from(const FieldValue& fv, const Vec2& x, const ScalarFn& f,
                                    const ScalarFn& u0) {
  if (!(fv.detJ > 0.0)) {
    std::ostringstream os;
    os << "deformation fold: det J = " << fv.detJ << " at x = " << format_point(x);
    throw DeformationFold(os.str());
  }
  PullbackSample ps;
  ps.detJ = fv.detJ;
  const Mat2 jtj = fv.J.transpose() * fv.J;
  // Explicit symmetric inverse keeps A exactly symmetric.
  const double djtj = jtj.a * jtj.d - jtj.b * jtj.b;
  const double off = -jtj.b / djtj * fv.detJ;
  ps.A = {jtj.d / djtj * fv.detJ, off, off, jtj.a / djtj * fv.detJ};
  ps.f_ref = f ? f(fv.V) * fv.detJ : 0.0;
  ps.u0_hat = u0 ? u0(fv.V) : 0.0;
  return ps;
}

class PullbackData {
 public:
  PullbackData(PerturbationField field, ScalarFn f, ScalarFn u0)
      : field_(std::move(field)), f_(std::move(f)), u0_(std::move(u0)) {}

  const PerturbationField& field() const { return field_; }
  const ScalarFn& source() const { return f_; }
  const ScalarFn& initial() const { return u0_; }

  Mat2 jacobian(const Vec2& x, std::span<const double> y) const { return rdqmc::jacobian(field_, x, y); }
  double det_j(const Vec2& x, std::span<const double> y) const { return evaluate(field_, x, y).detJ; }
  Mat2 A(const Vec2& x, std::span<const double> y) const { return sample(x, y).A; }
  double f_ref(const Vec2& x, std::span<const double> y) const { return sample(x, y).f_ref; }
  double u0_hat(const Vec2& x, std::span<const double> y) const { return sample(x, y).u0_hat; }

  PullbackSample sample(const Vec2& x, std::span<const double> y) const {
    return pullback_from(evaluate(field_, x, y), x, f_, u0_);
  }

 private:
  PerturbationField field_;
  ScalarFn f_, u0_;
};

inline PullbackData pullback_data(const PerturbationField& field, ScalarFn f, ScalarFn u0) {
  return {field, std::move(f), std::move(u0)};
}

struct SingularValueRange {
  double min = std::numeric_limits<double>::infinity();
  double max = 0.0;
  bool near_violation = false;  // min < 0.05
};

inline constexpr double kSigmaWarn = 0.05;

/// Extremal singular values of J over all (x, y) pairs.
inline SingularValueRange singular_value_range(const PerturbationField& field,
                                               std::span<const Vec2> xs,
                                               std::span<const std::vector<double>> ys) {
  SingularValueRange out;
  std::vector<detail::AngularTable> tables;
  tables.reserve(xs.size());
  for (const auto& x : xs) tables.emplace_back(x, field.theta, field.s);
  for (const auto& y : ys) {
    const auto xis = field.xi_values(y);
    for (const auto& tab : tables) {
      const auto sv = singular_values(evaluate_from_table(tab, xis).J);
      out.min = std::min(out.min, sv[0]);
      out.max = std::max(out.max, sv[1]);
    }
  }
  out.near_violation = out.min < kSigmaWarn;
  return out;
}

/// Evaluates the field repeatedly at a fixed set of points (e.g. quadrature
/// points) by caching the angular tables.
class FieldAtPoints {
 public:
  FieldAtPoints(const PerturbationField& field, std::span<const Vec2> points) : field_(field) {
    tables_.reserve(points.size());
    for (const auto& p : points) tables_.emplace_back(p, field.theta, field.s);
  }

  const PerturbationField& field() const { return field_; }
  std::size_t size() const { return tables_.size(); }

  FieldValue value(std::size_t i, std::span<const double> xis) const {
    return evaluate_from_table(tables_[i], xis);
  }
  const Vec2& point(std::size_t i) const { return tables_[i].x; }

 private:
  PerturbationField field_;
  std::vector<detail::AngularTable> tables_;
};

}  // namespace rdqmc
