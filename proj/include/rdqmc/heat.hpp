#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "fem.hpp"

namespace rdqmc {

struct TimeSeriesSolution {
  std::vector<std::vector<double>> steps;  // u^0..u^K over all nodes
  double dt = 0.0;
  double T = 0.0;

  std::size_t num_steps() const { return steps.empty() ? 0 : steps.size() - 1; }
};

inline std::size_t step_count(double dt, double T) {
  if (!(dt > 0.0) || !(T > 0.0)) throw ParameterError("time step and final time must be positive");
  const double K = std::round(T / dt);
  if (K < 1.0 || std::abs(K * dt - T) > 1e-12 * T)
    throw ParameterError("final time must be an integer multiple of the time step");
  return static_cast<std::size_t>(K);
}

/// Implicit Euler: (M_J + dt K_A) u^{k+1} = M_J u^k + dt F_ref, with u^0 the
/// det J weighted L2 projection of u0_hat.
inline TimeSeriesSolution solve_heat(const FemSpace& space, const CentroidCoefficients& c, double dt,
                                     double T) {
  const std::size_t K = step_count(dt, T);
  const FemSystem sys = space.assemble(c);
  const std::size_t n = space.num_dofs();

  CsrMatrix S = sys.mass;
  for (std::size_t p = 0; p < S.val.size(); ++p) S.val[p] += dt * sys.stiffness.val[p];

  TimeSeriesSolution out;
  out.dt = dt;
  out.T = T;
  out.steps.reserve(K + 1);

  std::vector<double> u(n, 0.0);
  if (!sys.load0.empty()) conjugate_gradient(sys.mass, sys.load0, u);
  out.steps.push_back(space.to_full(u));

  std::vector<double> rhs(n);
  for (std::size_t k = 0; k < K; ++k) {
    sys.mass.multiply(u, rhs);
    for (std::size_t i = 0; i < n; ++i) rhs[i] += dt * sys.load[i];
    conjugate_gradient(S, rhs, u);
    out.steps.push_back(space.to_full(u));
  }
  return out;
}

inline TimeSeriesSolution solve_heat(const PdeProblem& problem, std::span<const double> y, double dt,
                                     double T, std::size_t active = 0) {
  return solve_heat(problem.space(), problem.coefficients(y, active), dt, T);
}

enum class SpaceTimeNorm { L2L2, L2H10 };

inline NormKind spatial_kind(SpaceTimeNorm which) {
  return which == SpaceTimeNorm::L2L2 ? NormKind::L2 : NormKind::H10;
}

/// sqrt(dt sum_{k=1..K} ||u^k||^2), right-endpoint rule.
inline double spacetime_norm(const FemSpace& space, const TimeSeriesSolution& series,
                             SpaceTimeNorm which) {
  if (series.steps.size() < 2) throw ParameterError("spacetime_norm of an empty series");
  double acc = 0.0;
  for (std::size_t k = 1; k < series.steps.size(); ++k) {
    const double v = space.norm(series.steps[k], spatial_kind(which));
    acc += v * v;
  }
  return std::sqrt(series.dt * acc);
}

}  // namespace rdqmc
