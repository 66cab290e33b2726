#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"

namespace rdqmc {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Multi-index with a fixed number of coordinates.
using MultiIndex = std::vector<unsigned>;

inline unsigned order(const MultiIndex& nu) { return std::accumulate(nu.begin(), nu.end(), 0u); }

inline std::string format_index(const MultiIndex& nu) {
  std::string s = "(";
  for (std::size_t j = 0; j < nu.size(); ++j) s += (j ? "," : "") + std::to_string(nu[j]);
  return s + ")";
}

/// All multi-indices with `dims` coordinates and order <= max_order, sorted by
/// order and then lexicographically.
inline std::vector<MultiIndex> multi_indices(std::size_t dims, unsigned max_order) {
  if (dims == 0) throw ParameterError("multi-index dimension must be positive");
  std::vector<MultiIndex> out;
  MultiIndex nu(dims, 0);
  for (;;) {
    if (order(nu) <= max_order) out.push_back(nu);
    std::size_t j = 0;
    while (j < dims && ++nu[j] > max_order) nu[j++] = 0;
    if (j == dims) break;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MultiIndex& a, const MultiIndex& b) { return order(a) < order(b); });
  return out;
}

/// All m <= nu in mixed-radix order, starting at 0 and ending at nu.
inline std::vector<MultiIndex> sub_indices(const MultiIndex& nu) {
  std::vector<MultiIndex> out;
  MultiIndex m(nu.size(), 0);
  for (;;) {
    out.push_back(m);
    std::size_t j = 0;
    while (j < m.size() && m[j] == nu[j]) m[j++] = 0;
    if (j == m.size()) break;
    ++m[j];
  }
  return out;
}

inline MultiIndex subtract(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex r(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) r[j] = a[j] - b[j];
  return r;
}

inline BigInt factorial(unsigned n) {
  BigInt f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

inline BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  return factorial(n) / (factorial(k) * factorial(n - k));
}

/// prod_j binom(nu_j, m_j)
inline BigInt binomial(const MultiIndex& nu, const MultiIndex& m) {
  BigInt b = 1;
  for (std::size_t j = 0; j < nu.size(); ++j) b *= binomial(nu[j], m[j]);
  return b;
}

inline bool is_integer_beta(double beta) { return beta == std::floor(beta); }

/// Relative slack for sweeps with non-integer beta.
inline constexpr double kFloatSlack = 1e-9;

namespace detail {

inline void check_beta(double beta) {
  if (!(beta >= 1.0)) throw ParameterError("Gevrey exponent beta must be >= 1");
}

template <class T>
T to_number(double x) {
  if constexpr (std::is_same_v<T, Rational>) return Rational(x);
  else return static_cast<T>(x);
}

template <class T>
T to_number(const BigInt& x) {
  if constexpr (std::is_same_v<T, Rational>) return Rational(x);
  else return x.convert_to<T>();
}

template <class T>
double to_double(const T& x) {
  if constexpr (std::is_same_v<T, Rational>) return x.template convert_to<double>();
  else return static_cast<double>(x);
}

// x^e for e >= 0; exact when T is Rational and e is an integer.
template <class T>
T power(const T& x, double e) {
  if constexpr (std::is_same_v<T, Rational>) {
    if (!is_integer_beta(e) || e < 0) throw ParameterError("exact power needs a nonnegative integer exponent");
    T r = 1;
    for (long i = 0; i < static_cast<long>(e); ++i) r *= x;
    return r;
  } else {
    return std::pow(x, static_cast<T>(e));
  }
}

template <class T>
T fact_pow(unsigned n, double beta) {
  return power(to_number<T>(factorial(n)), beta);
}

// max{1, 2^{k-1}}
template <class T>
T max_one_pow2(unsigned k) {
  return k == 0 ? T(1) : power(T(2), static_cast<double>(k - 1));
}

template <class T>
bool leq(const T& lhs, const T& rhs) {
  if constexpr (std::is_same_v<T, Rational>) return lhs <= rhs;
  else return lhs <= rhs * (1 + static_cast<T>(kFloatSlack));
}

using Float = long double;

}  // namespace detail

struct CheckRow {
  std::string tuple;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool ok = true;
};

struct CheckReport {
  std::string name;
  std::vector<CheckRow> rows;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.ok; }));
  }
  bool passed() const { return !rows.empty() && failures() == 0; }
  const CheckRow* first_failure() const {
    for (const auto& r : rows)
      if (!r.ok) return &r;
    return nullptr;
  }
  double max_ratio() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.ratio);
    return m;
  }

  void append(const CheckReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

  template <class T>
  void add(std::string tuple, const T& lhs, const T& rhs) {
    CheckRow row;
    row.tuple = std::move(tuple);
    row.lhs = detail::to_double(lhs);
    row.rhs = detail::to_double(rhs);
    row.ratio = detail::to_double(T(lhs / rhs));
    row.ok = detail::leq(lhs, rhs);
    rows.push_back(std::move(row));
  }

  /// One line per tuple: tuple, LHS, RHS, LHS/RHS, status.
  std::string table() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-48s %16s %16s %12s %s\n", "tuple", "lhs", "rhs", "ratio", "status");
    os << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-48s %16.9e %16.9e %12.9f %s\n", r.tuple.c_str(), r.lhs, r.rhs,
                    r.ratio, r.ok ? "ok" : "FAIL");
      os << buf;
    }
    return os.str();
  }
};

/// Generalized A003480-type sequence scaled by C:
/// t_0 = 1, t_k = C sum_{l<k} ((k-l+q)!/(k-l)!)^beta t_l. C = 1 gives tau.
template <class T>
std::vector<T> tau_sequence(unsigned kmax, double beta, unsigned q, const T& C = T(1)) {
  detail::check_beta(beta);
  std::vector<T> ratio(kmax + 1);
  for (unsigned j = 1; j <= kmax; ++j)
    ratio[j] = detail::power(detail::to_number<T>(BigInt(factorial(j + q) / factorial(j))), beta);
  std::vector<T> t(kmax + 1, T(0));
  t[0] = 1;
  for (unsigned k = 1; k <= kmax; ++k) {
    T acc = 0;
    for (unsigned l = 0; l < k; ++l) acc += ratio[k - l] * t[l];
    t[k] = C * acc;
  }
  return t;
}

inline Rational tau_exact(unsigned k, unsigned beta, unsigned q) {
  return tau_sequence<Rational>(k, beta, q).back();
}

inline double tau(unsigned k, double beta, unsigned q) {
  if (is_integer_beta(beta)) return detail::to_double(tau_sequence<Rational>(k, beta, q).back());
  return static_cast<double>(tau_sequence<detail::Float>(k, beta, q).back());
}

namespace detail {

template <class T>
CheckReport check_tau_bound_impl(unsigned kmax, double beta, unsigned q, long tau_offset) {
  CheckReport rep;
  rep.name = "tau_bound";
  const auto t = tau_sequence<T>(kmax, beta, q);
  const T qf = to_number<T>(factorial(q));
  for (unsigned k = 0; k <= kmax; ++k) {
    const T lhs = t[k] + T(tau_offset);
    const T rhs = power(qf, beta * k) * power(T(2), beta * (q + 1) * k) * max_one_pow2<T>(k);
    std::ostringstream id;
    id << "k=" << k << " beta=" << beta << " q=" << q;
    rep.add(id.str(), lhs, rhs);
  }
  return rep;
}

template <class T>
CheckReport check_upsilon_impl(unsigned max_order, std::size_t dims, double beta, unsigned q) {
  CheckReport rep;
  rep.name = "upsilon";
  const auto t = tau_sequence<T>(max_order, beta, q);
  std::map<MultiIndex, T> ups;
  for (const auto& nu : multi_indices(dims, max_order)) {
    T val = 0;
    if (order(nu) == 0) {
      val = 1;
    } else {
      for (const auto& w : sub_indices(nu)) {
        const unsigned ow = order(w);
        if (ow == 0) continue;
        val += to_number<T>(binomial(nu, w)) * fact_pow<T>(ow + q, beta) * ups.at(subtract(nu, w));
      }
    }
    ups[nu] = val;
    const unsigned n = order(nu);
    std::ostringstream id;
    id << "nu=" << format_index(nu) << " beta=" << beta << " q=" << q;
    rep.add(id.str(), val, T(t[n] * fact_pow<T>(n, beta)));
  }
  return rep;
}

template <class T>
CheckReport check_xi_alpha_impl(unsigned max_order, std::size_t dims, double beta, double sigma_min,
                                double C) {
  CheckReport rep;
  rep.name = "xi_alpha";
  const T sig = to_number<T>(sigma_min);
  const T c = to_number<T>(C);
  std::map<MultiIndex, T> alpha, xi;
  for (const auto& nu : multi_indices(dims, max_order)) {
    const unsigned n = order(nu);
    T a = 0, x = 0;
    if (n == 0) {
      a = 1;
      x = T(1) / sig;
    } else {
      for (const auto& m : sub_indices(nu)) {
        const unsigned om = order(m);
        if (om == 0) continue;
        const MultiIndex rest = subtract(nu, m);
        const T w = to_number<T>(binomial(nu, m)) * fact_pow<T>(om, beta);
        a += w * alpha.at(rest);
        x += w * xi.at(rest);
      }
      x *= c / sig;
    }
    alpha[nu] = a;
    xi[nu] = x;
    const T shape = max_one_pow2<T>(n) * fact_pow<T>(n, beta);
    std::ostringstream tail;
    tail << format_index(nu) << " beta=" << beta;
    rep.add("alpha nu=" + tail.str(), a, shape);
    std::ostringstream xid;
    xid << "xi nu=" << tail.str() << " sigma_min=" << sigma_min << " C=" << C;
    const T bound = power(T(1) / sig, static_cast<double>(n + 1)) * power(c, static_cast<double>(n)) * shape;
    rep.add(xid.str(), x, bound);
  }
  return rep;
}

template <class T>
CheckReport check_superlemma_impl(unsigned max_order, std::size_t dims, double beta, unsigned k,
                                  double C, double C0) {
  CheckReport rep;
  rep.name = "superlemma";
  const T c = to_number<T>(C);
  const T c0 = to_number<T>(C0);
  const auto tt = tau_sequence<T>(max_order, beta, k, c);
  const auto t = tau_sequence<T>(max_order, beta, k);
  std::ostringstream par;
  par << " beta=" << beta << " k=" << k << " C=" << C << " C0=" << C0;
  std::map<MultiIndex, T> lam;
  for (const auto& nu : multi_indices(dims, max_order)) {
    const unsigned n = order(nu);
    T val = 0;
    if (n == 0) {
      val = c0;
    } else {
      for (const auto& m : sub_indices(nu)) {
        const unsigned om = order(m);
        if (om == 0) continue;
        val += to_number<T>(binomial(nu, m)) * fact_pow<T>(om + k, beta) *
               power(c, static_cast<double>(om)) * lam.at(subtract(nu, m));
      }
      val += fact_pow<T>(n + k, beta) * power(c, static_cast<double>(n));
      val *= c;
    }
    lam[nu] = val;
    const T bound = (1 + c0) * power(c, static_cast<double>(n)) * fact_pow<T>(n, beta) * tt[n];
    rep.add("Lambda nu=" + format_index(nu) + par.str(), val, bound);
  }
  for (unsigned n = 0; n <= max_order; ++n)
    rep.add("tau_tilde n=" + std::to_string(n) + par.str(), tt[n],
            T(power(c, static_cast<double>(n)) * t[n]));
  return rep;
}

}  // namespace detail

/// tau_{k,beta,q} <= (q!)^{beta k} 2^{beta (q+1) k} max{1, 2^{k-1}} for k <= kmax.
/// tau_offset perturbs the computed sequence; it exists to exercise failure reporting.
inline CheckReport check_tau_bound(unsigned kmax, double beta, unsigned q, long tau_offset = 0) {
  detail::check_beta(beta);
  if (kmax > 30) throw ParameterError("check_tau_bound supports kmax <= 30");
  if (is_integer_beta(beta)) return detail::check_tau_bound_impl<Rational>(kmax, beta, q, tau_offset);
  return detail::check_tau_bound_impl<detail::Float>(kmax, beta, q, tau_offset);
}

/// Upsilon_nu <= tau_{|nu|,beta,q} (|nu|!)^beta over all |nu| <= max_order.
inline CheckReport check_upsilon(unsigned max_order, std::size_t dims, double beta, unsigned q) {
  detail::check_beta(beta);
  if (max_order > 8 || dims > 3) throw ParameterError("check_upsilon supports order <= 8, dims <= 3");
  if (is_integer_beta(beta)) return detail::check_upsilon_impl<Rational>(max_order, dims, beta, q);
  return detail::check_upsilon_impl<detail::Float>(max_order, dims, beta, q);
}

/// alpha_nu <= max{1,2^{|nu|-1}} (|nu|!)^beta and
/// xi_nu <= sigma_min^{-|nu|-1} C^{|nu|} (|nu|!)^beta max{1,2^{|nu|-1}} at b = 1.
inline CheckReport check_xi_alpha(unsigned max_order, std::size_t dims, double beta, double sigma_min = 1.0,
                                  double C = 1.0) {
  detail::check_beta(beta);
  if (max_order > 8 || dims > 3) throw ParameterError("check_xi_alpha supports order <= 8, dims <= 3");
  if (!(sigma_min > 0.0 && sigma_min <= 1.0)) throw ParameterError("sigma_min must lie in (0,1]");
  if (!(C >= 1.0)) throw ParameterError("C must be >= 1");
  if (is_integer_beta(beta))
    return detail::check_xi_alpha_impl<Rational>(max_order, dims, beta, sigma_min, C);
  return detail::check_xi_alpha_impl<detail::Float>(max_order, dims, beta, sigma_min, C);
}

/// Lambda_nu <= (1+C0) C^{|nu|} (|nu|!)^beta tau~_{|nu|} at b = 1, with Lambda taken
/// with equality in its recurrence, plus tau~_n <= C^n tau_n.
inline CheckReport check_superlemma(unsigned max_order, std::size_t dims, double beta, unsigned k, double C,
                                    double C0) {
  detail::check_beta(beta);
  if (max_order > 8 || dims > 3) throw ParameterError("check_superlemma supports order <= 8, dims <= 3");
  if (!(C >= 1.0)) throw ParameterError("C must be >= 1");
  if (!(C0 >= 0.0)) throw ParameterError("C0 must be nonnegative");
  if (is_integer_beta(beta))
    return detail::check_superlemma_impl<Rational>(max_order, dims, beta, k, C, C0);
  return detail::check_superlemma_impl<detail::Float>(max_order, dims, beta, k, C, C0);
}

/// sum_{l=0..v} (l+D-1)!/l! = (v+D)!/(D v!) with D = d^2, and
/// sum_{m <= nu, |m| = l} binom(nu,m) = binom(|nu|,l). Equality is required.
inline CheckReport check_identities(unsigned vmax = 20, unsigned dmax = 3, unsigned max_order = 8,
                                    std::size_t dims = 3) {
  CheckReport rep;
  rep.name = "identities";
  auto add_eq = [&rep](std::string id, const BigInt& lhs, const BigInt& rhs) {
    CheckRow row;
    row.tuple = std::move(id);
    row.lhs = lhs.convert_to<double>();
    row.rhs = rhs.convert_to<double>();
    row.ratio = Rational(lhs, rhs).convert_to<double>();
    row.ok = lhs == rhs;
    rep.rows.push_back(std::move(row));
  };
  for (unsigned d = 1; d <= dmax; ++d) {
    const unsigned D = d * d;
    for (unsigned v = 0; v <= vmax; ++v) {
      BigInt lhs = 0;
      for (unsigned l = 0; l <= v; ++l) lhs += factorial(l + D - 1) / factorial(l);
      // compared as D * LHS = (v+D)!/v! to stay in integers
      add_eq("gosper d=" + std::to_string(d) + " v=" + std::to_string(v), lhs * D,
             factorial(v + D) / factorial(v));
    }
  }
  for (const auto& nu : multi_indices(dims, max_order)) {
    const unsigned n = order(nu);
    std::vector<BigInt> acc(n + 1, 0);
    for (const auto& m : sub_indices(nu)) acc[order(m)] += binomial(nu, m);
    for (unsigned l = 0; l <= n; ++l)
      add_eq("vandermonde nu=" + format_index(nu) + " l=" + std::to_string(l), acc[l], binomial(n, l));
  }
  return rep;
}

/// Inputs to the regularity constants; M, C_Delta_max and T are user supplied.
struct ModelConstants {
  double C = 1.0;
  double beta = 1.0;
  double sigma_min = 1.0;
  double sigma_max = 1.0;
  unsigned d = 2;
  double C_f = 1.0;
  std::vector<double> rho{1.0, 1.0};
  double C_u0 = 1.0;
  double C_Dref = 1.0;
  double area = std::numbers::pi;
  double M = 1.0;
  double C_Delta_max = 1.0;
  double T = 1.0;

  void validate() const {
    if (!(sigma_min > 0.0 && sigma_min <= 1.0 && sigma_max >= 1.0))
      throw ParameterError("need 0 < sigma_min <= 1 <= sigma_max");
    if (!(C >= 1.0)) throw ParameterError("C must be >= 1");
    if (!(beta >= 1.0)) throw ParameterError("beta must be >= 1");
    if (d == 0) throw ParameterError("d must be positive");
    for (double r : rho)
      if (!(r >= 0.0)) throw ParameterError("rho must be nonnegative");
    if (!(C_f > 0.0 && C_u0 > 0.0 && C_Dref > 0.0 && area > 0.0 && M > 0.0 && C_Delta_max > 0.0 && T > 0.0))
      throw ParameterError("model constants must be positive");
  }

  /// ||rho||_{l^{1/beta}}
  double rho_norm() const {
    double s = 0.0;
    for (double r : rho) s += std::pow(r, 1.0 / beta);
    return std::pow(s, beta);
  }
};

struct BaseConstants {
  double C_detJ = 0.0;
  double C_A1 = 0.0;
  double C_A2 = 0.0;
  double C_fref1 = 0.0;
  double C_fref2 = 0.0;
};

inline BaseConstants base_constants(const ModelConstants& mc) {
  mc.validate();
  const double sd = std::pow(mc.sigma_max, mc.d);
  BaseConstants b;
  b.C_detJ = std::pow(2.0, mc.beta) * mc.C / mc.sigma_min;
  b.C_A1 = sd / (mc.sigma_min * mc.sigma_min);
  b.C_A2 = b.C_detJ / (mc.sigma_min * mc.sigma_min) * mc.C * mc.C * std::pow(4.0, mc.beta);
  b.C_fref1 = sd * std::pow(2.0, -mc.beta) * mc.C_f;
  b.C_fref2 = std::pow(2.0, mc.beta) * mc.C * mc.C / mc.sigma_min * std::pow(2.0, mc.beta);
  return b;
}

struct StationaryConstants {
  BaseConstants base;
  double c0 = 0.0, c1 = 0.0, ct0 = 0.0, ct1 = 0.0;
  double c_max = 0.0;
  double C_u1 = 0.0;
  double C_u2 = 0.0;
};

inline StationaryConstants stationary_constants(const ModelConstants& mc) {
  StationaryConstants s;
  s.base = base_constants(mc);
  const double D = static_cast<double>(mc.d) * mc.d;
  const double fd = std::pow(std::tgamma(D + 1.0), mc.beta);
  const double smd = std::pow(mc.sigma_min, mc.d);
  s.c0 = s.base.C_A1 / (smd * fd);
  s.c1 = 2.0 * s.base.C_A2;
  s.ct0 = std::sqrt(mc.area) * mc.C_Dref * s.base.C_fref1 / (smd * fd);
  s.ct1 = s.base.C_fref2 * std::max(1.0, mc.rho_norm());
  s.c_max = std::max({s.c0, s.c1, s.ct0, s.ct1});
  s.C_u1 = 1.0 + mc.sigma_max * mc.sigma_max / smd * std::sqrt(mc.area) * mc.C_Dref * s.base.C_fref1;
  s.C_u2 = s.c_max * s.c_max * fd * std::pow(2.0, mc.beta * (D + 1.0) + 1.0);
  return s;
}

struct ParabolicConstants {
  BaseConstants base;
  double Ct1 = 0.0;
  double Ct2 = 0.0;
  double C0 = 0.0;
  double Ct = 0.0;
  double C_u1 = 0.0;
  double C_u2 = 0.0;
};

inline ParabolicConstants parabolic_constants(const ModelConstants& mc) {
  ParabolicConstants p;
  p.base = base_constants(mc);
  const auto& b = p.base;
  const double D = static_cast<double>(mc.d) * mc.d;
  const double sd = std::pow(mc.sigma_max, mc.d);
  const double smd = std::pow(mc.sigma_min, mc.d);
  const double CD = mc.C_Dref;
  const double CL = mc.C_Delta_max;
  const double sum = CL * sd * sd + CD * sd + sd * CD * CD * b.C_A1 + b.C_A1 + mc.M * mc.M * sd +
                     CL * sd * b.C_fref1 + CD * b.C_fref1 + mc.M * sd;
  const double mn = std::min(smd * smd / (CD * CD * CL * CL), smd / (mc.sigma_max * mc.sigma_max));
  p.Ct1 = sum / mn;
  p.Ct2 = 4.0 * b.C_detJ + 4.0 * b.C_A2 + 2.0 * b.C_fref2 * std::max(1.0, mc.rho_norm());
  p.C0 = p.Ct1 * (1.0 + mc.C_u0);
  p.Ct = std::max(p.Ct1 + mc.C_u0,
                  p.Ct2 + std::pow(2.0, mc.beta) * std::pow(static_cast<double>(mc.d), mc.beta) * mc.C * p.Ct2);
  p.C_u1 = 1.0 + p.C0;
  p.C_u2 = p.Ct * p.Ct * std::pow(std::tgamma(D + 2.0), mc.beta) * std::pow(2.0, mc.beta * (D + 2.0) + 1.0);
  return p;
}

}  // namespace rdqmc
