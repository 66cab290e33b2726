#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cubature.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "fem.hpp"
#include "heat.hpp"
#include "lattice.hpp"

namespace rdqmc {

/// ||u_h - u||_{L2} over the mesh with a degree-4 triangle rule.
inline double l2_error(const FemSpace& space, std::span<const double> u_full, const ScalarFn& exact) {
  // Dunavant 6-point rule: barycentric (a, b, b) permutations with weights.
  static constexpr std::array<std::array<double, 3>, 2> rule{{
      {0.445948490915965, 0.108103018168070, 0.223381589678011},
      {0.091576213509771, 0.816847572980459, 0.109951743655322},
  }};
  const Mesh& mesh = space.mesh();
  double acc = 0.0;
  for (std::size_t t = 0; t < space.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double T = space.triangle_area(t);
    for (const auto& [a, b, w] : rule) {
      for (int r = 0; r < 3; ++r) {
        std::array<double, 3> lam{a, a, a};
        lam[r] = b;
        Vec2 p{0.0, 0.0};
        double uh = 0.0;
        for (int k = 0; k < 3; ++k) {
          p[0] += lam[k] * mesh.nodes[tri[k]][0];
          p[1] += lam[k] * mesh.nodes[tri[k]][1];
          uh += lam[k] * u_full[tri[k]];
        }
        const double e = uh - exact(p);
        acc += w * T * e * e;
      }
    }
  }
  return std::sqrt(acc);
}

/// Identity-map coefficients with source f at the centroids.
inline CentroidCoefficients reference_coefficients(const FemSpace& space, const ScalarFn& f,
                                                   const ScalarFn& u0 = nullptr) {
  const std::size_t nt = space.num_triangles();
  CentroidCoefficients c;
  c.A.assign(nt, Mat2{});
  c.w.assign(nt, 1.0);
  c.g.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) c.g[t] = f ? f(space.centroids()[t]) : 0.0;
  if (u0) {
    c.g0.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) c.g0[t] = u0(space.centroids()[t]);
  }
  return c;
}

struct SpatialRate {
  std::vector<double> h;
  std::vector<double> error_l2;
  double order = 0.0;
  double norm_finest = 0.0;
  double norm_exact = 0.0;
};

/// -Laplace u = 1 on the unit disk, u = (1 - r^2)/4, identity map.
inline SpatialRate fem_spatial_rate(std::span<const double> hs) {
  SpatialRate out;
  const ScalarFn one = [](const Vec2&) { return 1.0; };
  const ScalarFn exact = [](const Vec2& x) { return 0.25 * (1.0 - x[0] * x[0] - x[1] * x[1]); };
  for (double h : hs) {
    const FemSpace space(build_disk_mesh(h));
    const auto u = solve_poisson(space, reference_coefficients(space, one)).coefficients;
    out.h.push_back(h);
    out.error_l2.push_back(l2_error(space, u, exact));
    out.norm_finest = space.norm(u, NormKind::L2);
  }
  out.order = loglog_slope(out.h, out.error_l2);
  out.norm_exact = std::sqrt(std::numbers::pi / 48.0);
  return out;
}

/// First Dirichlet eigenfunction of the unit disk, J0(j01 r).
inline double disk_eigenmode(const Vec2& x) {
  constexpr double j01 = 2.404825557695773;
  return std::cyl_bessel_j(0.0, j01 * std::hypot(x[0], x[1]));
}

struct TemporalRate {
  std::vector<double> dt;
  std::vector<double> error_l2l2;   // L2(0,T;L2) against the reference step
  std::vector<double> error_final;  // L2 at t = T
  double order = 0.0;
  double order_final = 0.0;
  double steady_state_diff = 0.0;   // ||u^K - u_poisson||_{L2} at T_steady
};

/// u_t - Laplace u = 0 with eigenmode initial data on a fixed mesh; errors
/// against implicit Euler with step dt_ref on the same mesh. The steady-state
/// run uses f = 1 and compares with the Poisson solution.
inline TemporalRate temporal_rate(double h, std::span<const double> dts, double T, double dt_ref,
                                  double T_steady, double dt_steady) {
  const FemSpace space(build_disk_mesh(h));
  const ScalarFn u0 = disk_eigenmode;
  const auto coeffs = reference_coefficients(space, nullptr, u0);
  const auto ref = solve_heat(space, coeffs, dt_ref, T);
  TemporalRate out;
  for (double dt : dts) {
    const auto run = solve_heat(space, coeffs, dt, T);
    const std::size_t stride = step_count(dt_ref, dt);
    double acc = 0.0;
    std::vector<double> diff(space.num_nodes());
    for (std::size_t k = 1; k < run.steps.size(); ++k) {
      const auto& r = ref.steps.at(k * stride);
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = run.steps[k][i] - r[i];
      const double e = space.norm(diff, NormKind::L2);
      acc += e * e;
    }
    out.dt.push_back(dt);
    out.error_l2l2.push_back(std::sqrt(dt * acc));
    out.error_final.push_back(space.norm(diff, NormKind::L2));
  }
  out.order = loglog_slope(out.dt, out.error_l2l2);
  out.order_final = loglog_slope(out.dt, out.error_final);

  const ScalarFn one = [](const Vec2&) { return 1.0; };
  const auto steady = reference_coefficients(space, one, u0);
  const auto run = solve_heat(space, steady, dt_steady, T_steady);
  const auto poisson = solve_poisson(space, steady).coefficients;
  std::vector<double> diff(space.num_nodes());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = run.steps.back()[i] - poisson[i];
  out.steady_state_diff = space.norm(diff, NormKind::L2);
  return out;
}

struct GeometryCheck {
  std::string experiment;
  double max_jacobian_rel_error = 0.0;  // analytic J vs central differences
  double max_identity_error = 0.0;      // |A J^T J / det J - I|_max
  double min_sigma = 0.0;               // smallest singular value of J seen
};

/// Jacobian, pullback identity and singular value checks on random (x, y).
/// Finite-difference points have |x| in [0.1, 0.99].
inline GeometryCheck geometry_check(const std::string& experiment, std::size_t s, std::size_t fd_points,
                                    std::size_t sigma_samples, std::uint64_t seed, double fd_step = 1e-5) {
  const auto field = PerturbationField::experiment(experiment, s);
  GeometryCheck out;
  out.experiment = experiment;
  out.min_sigma = std::numeric_limits<double>::infinity();
  const std::size_t stride = s + 2;
  std::vector<double> y(s);
  // Sample k: y from counters k*stride.., x from the last two counters.
  auto draw = [&](std::size_t k, double r_min, double r_max) {
    const std::uint64_t base = k * stride;
    for (std::size_t j = 0; j < s; ++j) y[j] = uniform_at(seed, base + j) - 0.5;
    const double r = r_min + (r_max - r_min) * uniform_at(seed, base + s);
    const double a = 2.0 * std::numbers::pi * uniform_at(seed, base + s + 1);
    return Vec2{r * std::cos(a), r * std::sin(a)};
  };
  for (std::size_t k = 0; k < fd_points; ++k) {
    const Vec2 x = draw(k, 0.1, 0.99);
    const Mat2 J = jacobian(field, x, y);
    std::array<double, 4> fd{};
    for (int c = 0; c < 2; ++c) {
      Vec2 xp = x, xm = x;
      xp[c] += fd_step;
      xm[c] -= fd_step;
      const Vec2 vp = displacement(field, xp, y), vm = displacement(field, xm, y);
      fd[c] = (vp[0] - vm[0]) / (2.0 * fd_step);      // dV1/dx_c
      fd[2 + c] = (vp[1] - vm[1]) / (2.0 * fd_step);  // dV2/dx_c
    }
    const std::array<double, 4> an{J.a, J.b, J.c, J.d};
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 4; ++i) {
      num = std::max(num, std::abs(an[i] - fd[i]));
      den = std::max(den, std::abs(an[i]));
    }
    out.max_jacobian_rel_error = std::max(out.max_jacobian_rel_error, num / den);

    const auto fv = evaluate(field, x, y);
    const auto ps = pullback_from(fv, x, nullptr, nullptr);
    const Mat2 I = ps.A * (fv.J.transpose() * fv.J) * (1.0 / fv.detJ);
    const double e = std::max({std::abs(I.a - 1.0), std::abs(I.b), std::abs(I.c), std::abs(I.d - 1.0)});
    out.max_identity_error = std::max(out.max_identity_error, e);
  }
  for (std::size_t k = 0; k < sigma_samples; ++k) {
    const Vec2 x = draw(fd_points + k, 1e-3, 1.0);
    out.min_sigma = std::min(out.min_sigma, singular_values(jacobian(field, x, y))[0]);
  }
  return out;
}

}  // namespace rdqmc
