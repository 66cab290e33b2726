#pragma once

// Brute-force reference implementations used only by the tests.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "rdqmc/fem.hpp"
#include "rdqmc/lattice.hpp"

namespace oracle {

using Subset = std::vector<std::size_t>;
using SubsetWeight = std::function<double(const Subset&)>;

inline double b2(double x) { return x * x - x + 1.0 / 6.0; }

/// All nonempty subsets of {0..s-1}.
inline std::vector<Subset> subsets(std::size_t s) {
  std::vector<Subset> out;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << s); ++mask) {
    Subset u;
    for (std::size_t j = 0; j < s; ++j)
      if (mask >> j & 1) u.push_back(j);
    out.push_back(u);
  }
  return out;
}

/// sum_{u != 0} gamma_u (1/n) sum_k prod_{j in u} B_2({k z_j / n}), one subset at a time.
inline double wce_by_subsets(std::uint64_t n, const std::vector<std::uint64_t>& z, const SubsetWeight& gamma) {
  double total = 0.0;
  for (const auto& u : subsets(z.size())) {
    double avg = 0.0;
    for (std::uint64_t k = 0; k < n; ++k) {
      double p = 1.0;
      for (auto j : u) p *= b2(std::fmod(static_cast<double>(k * z[j]), static_cast<double>(n)) / n);
      avg += p;
    }
    total += gamma(u) * avg / static_cast<double>(n);
  }
  return total;
}

/// ((|u|!)^beta prod_{j in u} C b_j / sqrt(2 zeta(2 lambda) / (2 pi^2)^lambda))^{2/(1+lambda)}.
inline SubsetWeight pod_closed_form(std::vector<double> b, double C, double beta, double lambda) {
  const double zf = 2.0 * std::riemann_zeta(2.0 * lambda) / std::pow(2.0 * std::numbers::pi * std::numbers::pi, lambda);
  return [=](const Subset& u) {
    double v = std::pow(std::tgamma(static_cast<double>(u.size()) + 1.0), beta);
    for (auto j : u) v *= C * b[j] / std::sqrt(zf);
    return std::pow(v, 2.0 / (1.0 + lambda));
  };
}

inline SubsetWeight product_form(std::vector<double> g) {
  return [=](const Subset& u) {
    double v = 1.0;
    for (auto j : u) v *= g[j];
    return v;
  };
}

/// Greedy minimization over odd candidates, each candidate scored by subset
/// enumeration; candidates within relative 1e-12 of the minimum are tied and
/// the smallest wins.
inline std::vector<std::uint64_t> cbc_by_subsets(std::uint64_t n, std::size_t s, const SubsetWeight& gamma) {
  std::vector<std::uint64_t> z;
  for (std::size_t d = 0; d < s; ++d) {
    std::vector<double> err;
    for (std::uint64_t c = 1; c < n; c += 2) {
      auto trial = z;
      trial.push_back(c);
      err.push_back(wce_by_subsets(n, trial, gamma));
    }
    double best = err[0];
    for (double e : err) best = std::min(best, e);
    std::size_t pick = 0;
    while (err[pick] > best + 1e-12 * std::abs(best)) ++pick;
    z.push_back(2 * pick + 1);
  }
  return z;
}

/// (1/sqrt R)(2/n sum_{u != 0} gamma_u^lambda c^{|u|})^{1/(2 lambda)} norm by subset enumeration.
inline double bound_by_subsets(std::uint64_t n, std::size_t s, const SubsetWeight& gamma, double lambda,
                               std::size_t R, double norm) {
  const double c = 2.0 * std::riemann_zeta(2.0 * lambda) / std::pow(2.0 * std::numbers::pi * std::numbers::pi, lambda);
  double sum = 0.0;
  for (const auto& u : subsets(s)) sum += std::pow(gamma(u), lambda) * std::pow(c, static_cast<double>(u.size()));
  return std::pow(2.0 * sum / static_cast<double>(n), 1.0 / (2.0 * lambda)) / std::sqrt(static_cast<double>(R)) * norm;
}

/// Dense P1 Laplacian over all nodes from the cotangent formula:
/// K_ij = -(cot a + cot b)/2 over the angles opposite edge ij.
inline std::vector<std::vector<double>> cotangent_laplacian(const rdqmc::Mesh& mesh) {
  const std::size_t n = mesh.nodes.size();
  std::vector<std::vector<double>> K(n, std::vector<double>(n, 0.0));
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int i = tri[e], j = tri[(e + 1) % 3], k = tri[(e + 2) % 3];
      const auto& pi = mesh.nodes[i];
      const auto& pj = mesh.nodes[j];
      const auto& pk = mesh.nodes[k];
      const double ux = pi[0] - pk[0], uy = pi[1] - pk[1];
      const double vx = pj[0] - pk[0], vy = pj[1] - pk[1];
      const double cot = (ux * vx + uy * vy) / std::abs(ux * vy - uy * vx);
      K[i][j] -= 0.5 * cot;
      K[j][i] -= 0.5 * cot;
      K[i][i] += 0.5 * cot;
      K[j][j] += 0.5 * cot;
    }
  }
  return K;
}

}  // namespace oracle
