#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "deformation.hpp"
#include "errors.hpp"
#include "fem.hpp"
#include "heat.hpp"
#include "lattice.hpp"
#include "parallel.hpp"

namespace rdqmc {

enum class Problem { Poisson, Heat };

inline const char* problem_name(Problem p) { return p == Problem::Poisson ? "poisson" : "heat"; }

/// Randomly shifted lattice estimate: q_r[r] is the lattice average under
/// shift r and q_ran their mean.
struct Estimate {
  std::vector<double> q_ran;
  std::vector<std::vector<double>> q_r;
};

inline std::string format_vector(std::span<const double> y) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t j = 0; j < y.size(); ++j) os << (j ? ", " : "") << y[j];
  os << ")";
  return os.str();
}

/// Q_r = (1/n) sum_i F(frac(t_i + shift_r) - 1/2). Nodes are processed in
/// blocks of kSumBlock; each block is summed sequentially and blocks are
/// combined in index order, so results do not depend on `threads`.
template <class Integrand>
Estimate estimate(const GeneratingVector& gv, const ShiftSet& shifts, unsigned threads, Integrand&& F) {
  if (shifts.s != gv.s()) throw ParameterError("shift dimension does not match generating vector");
  const std::uint64_t n = gv.n();
  const std::size_t nblocks = static_cast<std::size_t>((n + kSumBlock - 1) / kSumBlock);
  Estimate est;
  for (std::size_t r = 0; r < shifts.R; ++r) {
    std::vector<std::vector<double>> block_sum(nblocks);
    parallel_for(nblocks, threads, [&](std::size_t b) {
      std::vector<double> t(gv.s()), y(gv.s());
      std::vector<double>& acc = block_sum[b];
      const std::uint64_t i0 = b * kSumBlock + 1;
      const std::uint64_t i1 = std::min<std::uint64_t>(n, (b + 1) * kSumBlock);
      for (std::uint64_t i = i0; i <= i1; ++i) {
        lattice_point(gv, i, t);
        shift_center(t, shifts.shift(r), y);
        std::vector<double> v;
        try {
          v = F(std::span<const double>(y));
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "solve failed at shift r=" << r << ", node i=" << i << ", y=" << format_vector(y) << ": "
             << e.what();
          throw Error(os.str());
        }
        if (acc.empty()) acc.assign(v.size(), 0.0);
        for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
      }
    });
    std::vector<double> q(block_sum[0].size(), 0.0);
    for (const auto& bs : block_sum)
      for (std::size_t k = 0; k < q.size(); ++k) q[k] += bs[k];
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : q) v *= inv;
    est.q_r.push_back(std::move(q));
  }
  est.q_ran.assign(est.q_r[0].size(), 0.0);
  for (const auto& q : est.q_r)
    for (std::size_t k = 0; k < q.size(); ++k) est.q_ran[k] += q[k];
  const double invR = 1.0 / static_cast<double>(shifts.R);
  for (auto& v : est.q_ran) v *= invR;
  return est;
}

/// Flattened PDE output: node vector (Poisson) or steps u^0..u^K (heat).
struct SolutionLayout {
  Problem problem = Problem::Poisson;
  std::size_t nodes = 0;
  double dt = 0.0;
  double T = 0.0;

  std::size_t steps() const { return problem == Problem::Heat ? step_count(dt, T) : 0; }

  /// which = 0: L2 or L2(I;L2); which = 1: H10 or L2(I;H10).
  double norm(const FemSpace& space, std::span<const double> v, int which) const {
    const NormKind kind = which == 0 ? NormKind::L2 : NormKind::H10;
    if (problem == Problem::Poisson) return space.norm(v, kind);
    const std::size_t K = steps();
    double acc = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      const double x = space.norm(v.subspan(k * nodes, nodes), kind);
      acc += x * x;
    }
    return std::sqrt(dt * acc);
  }

  /// Spatial norm of the final step (heat) or of the vector (Poisson).
  double final_norm(const FemSpace& space, std::span<const double> v, int which) const {
    const NormKind kind = which == 0 ? NormKind::L2 : NormKind::H10;
    return space.norm(v.subspan(steps() * nodes, nodes), kind);
  }
};

inline std::vector<double> solve_flat(const PdeProblem& pde, const SolutionLayout& layout,
                                      std::span<const double> y, std::size_t active = 0) {
  if (layout.problem == Problem::Poisson) return solve_poisson(pde, y, active).coefficients;
  const auto series = solve_heat(pde, y, layout.dt, layout.T, active);
  std::vector<double> flat;
  flat.reserve(series.steps.size() * layout.nodes);
  for (const auto& s : series.steps) flat.insert(flat.end(), s.begin(), s.end());
  return flat;
}

inline Estimate estimate_expectation(const PdeProblem& pde, const SolutionLayout& layout,
                                     const GeneratingVector& gv, const ShiftSet& shifts,
                                     unsigned threads = 1) {
  if (gv.s() != pde.field().s) throw ParameterError("generating vector dimension differs from field s");
  return estimate(gv, shifts, threads, [&](std::span<const double> y) { return solve_flat(pde, layout, y); });
}

/// sqrt( sum_r ||Q_ran - Q_r||^2 / (R (R-1)) )
inline double rms_error(const Estimate& est, const std::function<double(std::span<const double>)>& norm) {
  const std::size_t R = est.q_r.size();
  if (R < 2) throw ParameterError("need >= 2 shifts for the RMS error");
  double acc = 0.0;
  std::vector<double> diff(est.q_ran.size());
  for (const auto& q : est.q_r) {
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = est.q_ran[k] - q[k];
    const double v = norm(diff);
    acc += v * v;
  }
  return std::sqrt(acc / (static_cast<double>(R) * static_cast<double>(R - 1)));
}

/// Least-squares slope of log(y) against log(x) over entries with y > 0.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::nan("");
  const double mm = static_cast<double>(m);
  return (mm * sxy - sx * sy) / (mm * sxx - sx * sx);
}

/// Table with metadata, emitted as CSV with leading "#" comment lines.
struct ErrorReport {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> slopes;

  std::vector<double> column(const std::string& name) const {
    std::size_t c = 0;
    while (c < columns.size() && columns[c] != name) ++c;
    if (c == columns.size()) throw ParameterError("no column named '" + name + "'");
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }

  double slope(const std::string& name) const {
    for (const auto& [k, v] : slopes)
      if (k == name) return v;
    throw ParameterError("no slope for '" + name + "'");
  }
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const ErrorReport& rep) {
  std::string out;
  if (!rep.metadata.empty()) {
    out += "#";
    for (const auto& [k, v] : rep.metadata) out += " " + k + "=" + v;
    out += "\n";
  }
  if (!rep.slopes.empty()) {
    out += "#";
    for (const auto& [k, v] : rep.slopes) out += " slope_" + k + "=" + format_number(v);
    out += "\n";
  }
  for (std::size_t c = 0; c < rep.columns.size(); ++c) out += (c ? "," : "") + rep.columns[c];
  out += "\n";
  for (const auto& r : rep.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_number(r[c]);
    out += "\n";
  }
  os << out;
}

/// Inputs of a convergence or truncation study.
struct StudyConfig {
  std::string experiment = "E1";
  std::size_t s = 20;
  double theta = 0.0;  // 0 selects the experiment default
  double h = 0.2;
  Problem problem = Problem::Poisson;
  double dt = 0.1;
  double T = 1.0;
  std::vector<int> m_list{4, 5, 6, 7, 8, 9, 10};
  std::size_t R = 8;
  std::uint64_t seed = 0;
  ScalarFn f = [](const Vec2&) { return 1.0; };
  ScalarFn u0 = [](const Vec2&) { return 0.0; };
  unsigned threads = 1;
  bool record_wall_time = true;
  std::function<GeneratingVector(int m, std::size_t s)> vectors;
  std::string vector_source = "cbc";
  std::vector<std::pair<std::string, std::string>> extra_metadata;
  // truncation study
  std::size_t s_ref = 64;
  std::vector<std::size_t> levels{2, 4, 8, 16};
  int m_trunc = 10;
};

inline std::vector<std::pair<std::string, std::string>> study_metadata(const StudyConfig& c, std::size_t s) {
  std::vector<std::pair<std::string, std::string>> md = c.extra_metadata;
  md.emplace_back("experiment", c.experiment);
  md.emplace_back("s", std::to_string(s));
  md.emplace_back("problem", problem_name(c.problem));
  md.emplace_back("h", format_number(c.h));
  if (c.problem == Problem::Heat) {
    md.emplace_back("dt", format_number(c.dt));
    md.emplace_back("T", format_number(c.T));
  }
  md.emplace_back("seed", std::to_string(c.seed));
  md.emplace_back("vectors", c.vector_source);
  return md;
}

/// One row (m, n, R, rms_0, rms_1, seconds) per m.
inline ErrorReport convergence_study(const StudyConfig& c) {
  if (!c.vectors) throw ParameterError("no generating-vector source configured");
  if (c.R < 2) throw ParameterError("need >= 2 shifts for the RMS error");
  const FemSpace space(build_disk_mesh(c.h));
  const auto field = PerturbationField::experiment(c.experiment, c.s, c.theta);
  const PdeProblem pde(space, field, c.f, c.u0);
  const SolutionLayout layout{c.problem, space.num_nodes(), c.dt, c.T};
  if (c.problem == Problem::Heat) (void)layout.steps();
  const ShiftSet shifts = sample_shifts(c.R, c.s, c.seed);

  ErrorReport rep;
  rep.metadata = study_metadata(c, c.s);
  const bool heat = c.problem == Problem::Heat;
  rep.columns = {"m", "n", "R", heat ? "rms_L2L2" : "rms_L2", heat ? "rms_L2H10" : "rms_H10", "seconds"};

  std::vector<int> ms = c.m_list;
  std::sort(ms.begin(), ms.end());
  for (int m : ms) {
    const auto t0 = std::chrono::steady_clock::now();
    const GeneratingVector gv = c.vectors(m, c.s);
    if (gv.n() != (std::uint64_t{1} << m) || gv.s() != c.s)
      throw ParameterError("generating vector for m=" + std::to_string(m) + " has wrong n or s");
    const Estimate est = estimate_expectation(pde, layout, gv, shifts, c.threads);
    const double e0 = rms_error(est, [&](std::span<const double> v) { return layout.norm(space, v, 0); });
    const double e1 = rms_error(est, [&](std::span<const double> v) { return layout.norm(space, v, 1); });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back({static_cast<double>(m), static_cast<double>(gv.n()), static_cast<double>(c.R), e0, e1,
                        c.record_wall_time ? secs : 0.0});
  }
  const auto n = rep.column("n");
  rep.slopes.emplace_back(rep.columns[3], loglog_slope(n, rep.column(rep.columns[3])));
  rep.slopes.emplace_back(rep.columns[4], loglog_slope(n, rep.column(rep.columns[4])));
  return rep;
}

/// ||Q_ran[u_{s'} - u_{s_ref}]|| per norm with common nodes in s_ref
/// dimensions; the truncated solve evaluates y_j, j > s', at 0.
inline ErrorReport truncation_study(const StudyConfig& c) {
  if (!c.vectors) throw ParameterError("no generating-vector source configured");
  for (auto sp : c.levels)
    if (sp < 1 || sp > c.s_ref)
      throw ParameterError("truncation level " + std::to_string(sp) + " outside [1, s_ref]");
  const FemSpace space(build_disk_mesh(c.h));
  const auto field = PerturbationField::experiment(c.experiment, c.s_ref, c.theta);
  const PdeProblem pde(space, field, c.f, c.u0);
  const SolutionLayout layout{c.problem, space.num_nodes(), c.dt, c.T};
  const std::size_t len = c.problem == Problem::Heat ? (layout.steps() + 1) * layout.nodes : layout.nodes;
  const GeneratingVector gv = c.vectors(c.m_trunc, c.s_ref);
  if (gv.n() != (std::uint64_t{1} << c.m_trunc) || gv.s() != c.s_ref)
    throw ParameterError("truncation generating vector has wrong n or s");
  const ShiftSet shifts = sample_shifts(c.R, c.s_ref, c.seed);
  const std::size_t L = c.levels.size();

  // Integrand: concatenated differences u_{s'_l}(y) - u(y) for every level.
  const Estimate est = estimate(gv, shifts, c.threads, [&](std::span<const double> y) {
    const auto full = solve_flat(pde, layout, y);
    std::vector<double> out(L * len, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      if (c.levels[l] == c.s_ref) continue;
      const auto part = solve_flat(pde, layout, y, c.levels[l]);
      for (std::size_t k = 0; k < len; ++k) out[l * len + k] = part[k] - full[k];
    }
    return out;
  });

  ErrorReport rep;
  rep.metadata = study_metadata(c, c.s_ref);
  rep.metadata.emplace_back("n", std::to_string(gv.n()));
  rep.metadata.emplace_back("R", std::to_string(c.R));
  const bool heat = c.problem == Problem::Heat;
  rep.columns = {"s_trunc", "err_L2", "err_H10"};
  if (heat) {
    rep.columns.push_back("err_L2L2");
    rep.columns.push_back("err_L2H10");
  }
  for (std::size_t l = 0; l < L; ++l) {
    std::span<const double> d(est.q_ran.data() + l * len, len);
    std::vector<double> row{static_cast<double>(c.levels[l]), layout.final_norm(space, d, 0),
                            layout.final_norm(space, d, 1)};
    if (heat) {
      row.push_back(layout.norm(space, d, 0));
      row.push_back(layout.norm(space, d, 1));
    }
    rep.rows.push_back(std::move(row));
  }
  const auto sx = rep.column("s_trunc");
  for (std::size_t col = 1; col < rep.columns.size(); ++col)
    rep.slopes.emplace_back(rep.columns[col], loglog_slope(sx, rep.column(rep.columns[col])));
  return rep;
}

}  // namespace rdqmc
