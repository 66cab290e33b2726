#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "parallel.hpp"

namespace rdqmc {

/// Riemann zeta for x > 1: direct sum to N-1 plus Euler-Maclaurin tail.
inline double zeta(double x) {
  if (!(x > 1.0)) throw ParameterError("zeta requires argument > 1");
  constexpr int N = 64;
  double sum = 0.0;
  for (int k = N - 1; k >= 1; --k) sum += std::pow(static_cast<double>(k), -x);
  const double n = N;
  const double fN = std::pow(n, -x);
  const double tail = n * fN / (x - 1.0) + 0.5 * fN + x * fN / n / 12.0 -
                      x * (x + 1) * (x + 2) * fN / (n * n * n) / 720.0 +
                      x * (x + 1) * (x + 2) * (x + 3) * (x + 4) * fN / (n * n * n * n * n) / 30240.0;
  return sum + tail;
}

/// B_2(x) = x^2 - x + 1/6.
inline double bernoulli2(double x) { return x * x - x + 1.0 / 6.0; }

/// gamma_u = Gamma_{|u|} * prod_{j in u} gamma_j, Gamma_0 = 1.
/// Order weights are kept as logarithms so that large orders do not overflow.
struct PodWeights {
  double beta = 1.0;
  double lambda = 1.0;
  std::vector<double> log_order;    // log Gamma_l, l = 0..s
  std::vector<double> product;      // gamma_j, j = 1..s
  std::vector<double> dim_factors;  // d_j before the 2/(1+lambda) power

  std::size_t s() const { return product.size(); }
  double order_weight(std::size_t l) const { return std::exp(log_order.at(l)); }
  double order_ratio(std::size_t l) const { return std::exp(log_order[l] - log_order[l - 1]); }

  /// u holds 0-based coordinate indices.
  double gamma(std::span<const std::size_t> u) const {
    double g = order_weight(u.size());
    for (auto j : u) g *= product.at(j);
    return g;
  }

  /// General POD weights from explicit Gamma_l (l = 0..s, Gamma_0 = 1) and gamma_j.
  static PodWeights general(std::span<const double> order, std::span<const double> prod,
                            double lambda = 1.0) {
    if (order.size() != prod.size() + 1) throw ParameterError("need s+1 order weights");
    PodWeights w;
    w.lambda = lambda;
    for (double g : order) {
      if (!(g > 0.0)) throw ParameterError("order weights must be positive");
      w.log_order.push_back(std::log(g));
    }
    w.log_order[0] = 0.0;
    for (double g : prod) {
      if (!(g >= 0.0)) throw ParameterError("product weights must be nonnegative");
      w.product.push_back(g);
    }
    w.dim_factors = w.product;
    return w;
  }

  static PodWeights product_weights(std::span<const double> prod, double lambda = 1.0) {
    std::vector<double> ones(prod.size() + 1, 1.0);
    return general(ones, prod, lambda);
  }
};

/// Case split for lambda in terms of the summability exponent p.
inline double select_lambda(double p, double beta, double eps) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("summability exponent p must lie in (0,1)");
  if (!(beta >= 1.0)) throw ParameterError("Gevrey exponent beta must be >= 1");
  if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("epsilon must lie in (0,1/2)");
  const double inv_beta = 1.0 / beta;
  if (p > 2.0 / 3.0 && p < inv_beta) return p / (2.0 - p);
  if (p <= std::min(2.0 / 3.0, inv_beta) && p != inv_beta) return 1.0 / (2.0 - 2.0 * eps);
  throw ParameterError("uncovered parameter regime: no lambda for p=" + std::to_string(p) +
                       ", beta=" + std::to_string(beta));
}

/// 2 zeta(2 lambda) / (2 pi^2)^lambda.
inline double zeta_factor(double lambda) {
  return 2.0 * zeta(2.0 * lambda) / std::pow(2.0 * std::numbers::pi * std::numbers::pi, lambda);
}

inline void check_lambda(double lambda) {
  if (!(lambda > 0.5 && lambda <= 1.0)) throw ParameterError("lambda must lie in (1/2,1]");
}

/// gamma_u = ((|u|!)^beta prod C b_j / sqrt(zeta_factor))^{2/(1+lambda)}.
inline PodWeights pod_weights(std::span<const double> b, double C, double beta, double lambda) {
  check_lambda(lambda);
  if (!(C > 0.0)) throw ParameterError("C must be positive");
  const double expo = 2.0 / (1.0 + lambda);
  const double denom = std::sqrt(zeta_factor(lambda));
  PodWeights w;
  w.beta = beta;
  w.lambda = lambda;
  w.log_order.resize(b.size() + 1);
  for (std::size_t l = 0; l <= b.size(); ++l)
    w.log_order[l] = expo * beta * std::lgamma(static_cast<double>(l) + 1.0);
  for (double bj : b) {
    if (!(bj >= 0.0)) throw ParameterError("b_j must be nonnegative");
    const double d = C * bj / denom;
    w.dim_factors.push_back(d);
    w.product.push_back(std::pow(d, expo));
  }
  return w;
}

namespace detail {

// Per-node order levels q_l(k) = Gamma_l e_l(x_1(k), ..., x_d(k)) of the
// POD product expansion, stored level-major.
class PodLevels {
 public:
  PodLevels(std::size_t n, std::size_t s) : n_(n), q_((s + 1) * n, 0.0) {
    std::fill(q_.begin(), q_.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
  }

  double* level(std::size_t l) { return q_.data() + l * n_; }
  const double* level(std::size_t l) const { return q_.data() + l * n_; }

  // Add coordinate d (1-based) with per-node factors x(k).
  void add(std::size_t d, const PodWeights& w, std::span<const double> x) {
    for (std::size_t l = d; l >= 1; --l) {
      const double ratio = w.order_ratio(l);
      double* ql = level(l);
      const double* qm = level(l - 1);
      for (std::size_t k = 0; k < n_; ++k) ql[k] += x[k] * ratio * qm[k];
    }
  }

  // sum_k sum_{l=1..d} q_l(k)
  double total(std::size_t d) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      double a = 0.0;
      for (std::size_t l = 1; l <= d; ++l) a += level(l)[k];
      sum += a;
    }
    return sum;
  }

 private:
  std::size_t n_;
  std::vector<double> q_;
};

// omega[j] = B_2(j/n)
inline std::vector<double> bernoulli_table(std::uint64_t n) {
  std::vector<double> om(n);
  for (std::uint64_t j = 0; j < n; ++j)
    om[j] = bernoulli2(static_cast<double>(j) / static_cast<double>(n));
  return om;
}

}  // namespace detail

/// Squared shift-averaged worst-case error
/// e^2 = sum_{u != 0} gamma_u (1/n) sum_k prod_{j in u} B_2({k z_j / n}).
inline double shift_avg_wce(const GeneratingVector& gv, const PodWeights& w) {
  if (w.s() != gv.s()) throw ParameterError("weights and generating vector differ in dimension");
  const std::uint64_t n = gv.n();
  const auto om = detail::bernoulli_table(n);
  detail::PodLevels levels(n, gv.s());
  std::vector<double> x(n);
  for (std::size_t d = 1; d <= gv.s(); ++d) {
    for (std::uint64_t k = 0; k < n; ++k) x[k] = w.product[d - 1] * om[(k * gv[d - 1]) & (n - 1)];
    levels.add(d, w, x);
  }
  return levels.total(gv.s()) / static_cast<double>(n);
}

struct WceReport {
  GeneratingVector z;
  std::vector<double> per_dim_error;  // e^2 after each CBC step
};

/// Relative band inside which two candidate errors count as tied.
inline constexpr double kCbcTieTolerance = 1e-12;

/// Component-by-component construction over odd candidates; ties go to the
/// smallest candidate.
inline WceReport cbc_construct(std::uint64_t n, std::size_t s, const PodWeights& w,
                               unsigned threads = 1) {
  if (!is_power_of_two(n) || n < 2) throw ParameterError("cbc requires n = 2^m with m >= 1");
  if (s == 0) throw ParameterError("cbc requires s >= 1");
  if (w.s() < s) throw ParameterError("weights have fewer dimensions than requested");

  const auto om = detail::bernoulli_table(n);
  const std::size_t ncand = n / 2;
  detail::PodLevels levels(n, s);
  std::vector<std::uint64_t> z;
  std::vector<double> errors;
  std::vector<double> P(n), x(n), cand_err(ncand);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t d = 1; d <= s; ++d) {
    const double base = levels.total(d - 1);
    // P(k) = sum_{l=1..d} (Gamma_l / Gamma_{l-1}) q_{l-1}(k)
    std::fill(P.begin(), P.end(), 0.0);
    for (std::size_t l = 1; l <= d; ++l) {
      const double ratio = w.order_ratio(l);
      const double* qm = levels.level(l - 1);
      for (std::uint64_t k = 0; k < n; ++k) P[k] += ratio * qm[k];
    }
    const double gd = w.product[d - 1];
    parallel_for(ncand, threads, [&](std::size_t c) {
      const std::uint64_t cand = 2 * c + 1;
      double acc = 0.0;
      for (std::uint64_t k = 0; k < n; ++k) acc += om[(k * cand) & (n - 1)] * P[k];
      cand_err[c] = (base + gd * acc) * inv_n;
    });
    double best = cand_err[0];
    for (double e : cand_err) best = std::min(best, e);
    const double band = best + kCbcTieTolerance * std::abs(best);
    std::size_t pick = 0;
    while (cand_err[pick] > band) ++pick;

    const std::uint64_t zd = 2 * pick + 1;
    z.push_back(zd);
    errors.push_back(cand_err[pick]);
    for (std::uint64_t k = 0; k < n; ++k) x[k] = gd * om[(k * zd) & (n - 1)];
    levels.add(d, w, x);
  }
  return {GeneratingVector(n, std::move(z)), std::move(errors)};
}

/// (1/sqrt R) (2/n sum_{u != 0} gamma_u^lambda c^{|u|})^{1/(2 lambda)} * norm_bound,
/// c = zeta_factor(lambda), summed by order via elementary symmetric polynomials.
inline double theoretical_bound(std::uint64_t n, const PodWeights& w, double lambda, std::size_t R,
                                double norm_bound) {
  check_lambda(lambda);
  if (n == 0 || R == 0) throw ParameterError("theoretical_bound needs n >= 1 and R >= 1");
  const double c = zeta_factor(lambda);
  const std::size_t s = w.s();
  std::vector<double> e(s + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t j = 0; j < s; ++j) {
    const double g = std::pow(w.product[j], lambda) * c;
    for (std::size_t l = j + 1; l >= 1; --l) e[l] += g * e[l - 1];
  }
  double sum = 0.0;
  for (std::size_t l = 1; l <= s; ++l) sum += std::exp(lambda * w.log_order[l]) * e[l];
  return std::pow(2.0 * sum / static_cast<double>(n), 1.0 / (2.0 * lambda)) /
         std::sqrt(static_cast<double>(R)) * norm_bound;
}

}  // namespace rdqmc
