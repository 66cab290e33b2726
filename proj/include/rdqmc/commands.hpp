#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cbc.hpp"
#include "config.hpp"
#include "cubature.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "regularity.hpp"
#include "validation.hpp"

namespace rdqmc {

namespace fs = std::filesystem;

struct CbcSetup {
  double theta = 0.0;
  double p = 0.0;
  double lambda = 0.0;
  PodWeights weights;
};

/// Weights for dimension s from the config: b_j = j^{1-theta}, lambda from p.
inline CbcSetup cbc_setup(const ExperimentConfig& c, std::size_t s) {
  CbcSetup out;
  out.theta = c.resolved_theta();
  out.p = c.cbc.p.value_or(1.0 / (out.theta - 1.0) + c.cbc.p_offset);
  out.lambda = select_lambda(out.p, c.cbc.beta, c.cbc.epsilon);
  out.weights = pod_weights(b_sequence(out.theta, s), c.cbc.C, c.cbc.beta, out.lambda);
  return out;
}

inline std::string vector_file_name(int m) { return "lattice_m" + std::to_string(m) + ".txt"; }

inline std::vector<std::pair<std::string, std::string>> artifact_header(const ExperimentConfig& c) {
  return {{"config_hash", config_hash(c)}, {"seed", std::to_string(c.seed)}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline void write_report(const fs::path& path, const ErrorReport& rep) {
  std::ostringstream os;
  write_csv(os, rep);
  write_text(path, os.str());
}

/// Generating vectors for one config, either read from cbc.vector_dir or
/// built in-process. Built vectors are cached per (m, s).
class VectorSource {
 public:
  VectorSource(const ExperimentConfig& c, unsigned threads) : config_(c), threads_(threads) {}

  std::string name() const { return config_.cbc.vector_dir.empty() ? "cbc" : "file"; }

  GeneratingVector get(int m, std::size_t s) {
    const std::uint64_t n = std::uint64_t{1} << m;
    if (!config_.cbc.vector_dir.empty()) {
      const fs::path path = fs::path(config_.cbc.vector_dir) / vector_file_name(m);
      std::ifstream in(path);
      if (!in) throw Error("cannot open generating vector '" + path.string() + "'");
      GeneratingVector gv = [&] {
        try {
          return read_generating_vector(in);
        } catch (const Error& e) {
          throw FormatError(path.string() + ": " + e.what());
        }
      }();
      if (gv.n() != n) throw FormatError(path.string() + ": expected n=" + std::to_string(n));
      if (gv.s() < s)
        throw FormatError(path.string() + ": has s=" + std::to_string(gv.s()) + ", need " + std::to_string(s));
      return gv.prefix(s);
    }
    auto key = std::make_pair(m, s);
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, cbc_construct(n, s, cbc_setup(config_, s).weights, threads_).z).first;
    return it->second;
  }

 private:
  ExperimentConfig config_;
  unsigned threads_;
  std::map<std::pair<int, std::size_t>, GeneratingVector> cache_;
};

struct CbcOutput {
  std::vector<GeneratingVector> vectors;
  ErrorReport report;  // m, n, dim, wce2
};

/// m_list plus truncation.m, sorted and unique.
inline std::vector<int> cbc_m_values(const ExperimentConfig& c) {
  std::set<int> ms(c.m_list.begin(), c.m_list.end());
  ms.insert(c.truncation.m);
  return {ms.begin(), ms.end()};
}

/// Writes lattice_m<m>.txt per m and cbc_report.csv into output.dir. Vectors
/// have max(s, truncation.s_ref) components; runs use their s-prefix.
inline CbcOutput cmd_cbc(const ExperimentConfig& c, unsigned threads = 1) {
  validate(c);
  const std::size_t s = std::max(c.s, c.truncation.s_ref);
  const CbcSetup setup = cbc_setup(c, s);
  CbcOutput out;
  out.report.metadata = artifact_header(c);
  out.report.metadata.emplace_back("experiment", c.experiment);
  out.report.metadata.emplace_back("s", std::to_string(s));
  out.report.metadata.emplace_back("theta", format_number(setup.theta));
  out.report.metadata.emplace_back("p", format_number(setup.p));
  out.report.metadata.emplace_back("lambda", format_number(setup.lambda));
  out.report.metadata.emplace_back("beta", format_number(c.cbc.beta));
  out.report.metadata.emplace_back("C", format_number(c.cbc.C));
  out.report.columns = {"m", "n", "dim", "wce2"};
  const fs::path dir(c.output.dir);
  for (int m : cbc_m_values(c)) {
    const std::uint64_t n = std::uint64_t{1} << m;
    const WceReport w = cbc_construct(n, s, setup.weights, threads);
    for (std::size_t d = 0; d < w.per_dim_error.size(); ++d)
      out.report.rows.push_back(
          {static_cast<double>(m), static_cast<double>(n), static_cast<double>(d + 1), w.per_dim_error[d]});
    std::ostringstream os;
    write_generating_vector(os, w.z);
    write_text(dir / vector_file_name(m), os.str());
    out.vectors.push_back(w.z);
  }
  write_report(dir / "cbc_report.csv", out.report);
  return out;
}

inline StudyConfig study_config(const ExperimentConfig& c, Problem problem, unsigned threads) {
  StudyConfig sc;
  sc.experiment = c.experiment;
  sc.s = c.s;
  sc.theta = c.theta.value_or(0.0);
  sc.h = c.mesh_width;
  sc.problem = problem;
  sc.dt = c.time_step;
  sc.T = c.final_time;
  sc.m_list = c.m_list;
  sc.R = c.shifts;
  sc.seed = c.seed;
  sc.f = source_function(c.source);
  sc.u0 = initial_function(c.initial);
  sc.threads = threads;
  sc.record_wall_time = c.output.record_wall_time;
  sc.extra_metadata = {{"config_hash", config_hash(c)}};  // seed is part of the study metadata
  if (c.theta) sc.extra_metadata.emplace_back("theta", format_number(*c.theta));
  sc.extra_metadata.emplace_back("source", c.source);
  if (problem == Problem::Heat) sc.extra_metadata.emplace_back("initial", c.initial);
  sc.s_ref = c.truncation.s_ref;
  sc.levels = c.truncation.levels;
  sc.m_trunc = c.truncation.m;
  return sc;
}

inline std::string run_file_name(const ExperimentConfig& c, Problem problem) {
  return std::string("convergence_") + problem_name(problem) + "_" + c.experiment + ".csv";
}

inline std::string truncation_file_name(const ExperimentConfig& c) {
  return "truncation_" + c.truncation.problem + "_" + c.experiment + ".csv";
}

/// Convergence study; writes convergence_<problem>_<experiment>.csv.
inline ErrorReport cmd_run(const ExperimentConfig& c, Problem problem, unsigned threads = 1) {
  validate(c);
  StudyConfig sc = study_config(c, problem, threads);
  auto source = std::make_shared<VectorSource>(c, threads);
  sc.vector_source = source->name();
  sc.vectors = [source](int m, std::size_t s) { return source->get(m, s); };
  ErrorReport rep = convergence_study(sc);
  write_report(fs::path(c.output.dir) / run_file_name(c, problem), rep);
  return rep;
}

/// Truncation study with truncation.problem; writes truncation_<problem>_<experiment>.csv.
inline ErrorReport cmd_truncation(const ExperimentConfig& c, unsigned threads = 1) {
  validate(c);
  StudyConfig sc = study_config(c, parse_problem(c.truncation.problem), threads);
  auto source = std::make_shared<VectorSource>(c, threads);
  sc.vector_source = source->name();
  sc.vectors = [source](int m, std::size_t s) { return source->get(m, s); };
  ErrorReport rep = truncation_study(sc);
  write_report(fs::path(c.output.dir) / truncation_file_name(c), rep);
  return rep;
}

struct VerifyOptions {
  long tau_fault = 0;  // added to every tau value in check_tau_bound
  unsigned threads = 1;
};

struct SuiteResult {
  std::string name;
  CheckReport report;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool passed() const {
    for (const auto& s : suites)
      if (!s.report.passed()) return false;
    return true;
  }

  /// One summary line per suite, then every failing row.
  std::string summary() const {
    std::ostringstream os;
    char buf[160];
    for (const auto& s : suites) {
      const std::size_t total = s.report.rows.size();
      const std::size_t fail = s.report.failures();
      std::snprintf(buf, sizeof buf, "%-20s %6zu/%-6zu passed  max ratio %.6f  %s\n", s.name.c_str(), total - fail,
                    total, s.report.max_ratio(), fail == 0 && total > 0 ? "PASS" : "FAIL");
      os << buf;
    }
    for (const auto& s : suites)
      for (const auto& r : s.report.rows)
        if (!r.ok) os << "failure in " << s.name << ": " << r.tuple << " lhs=" << r.lhs << " rhs=" << r.rhs << "\n";
    return os.str();
  }

  std::string table() const {
    std::string out;
    for (const auto& s : suites) out += "== " + s.name + "\n" + s.report.table();
    return out;
  }
};

/// Appendix recurrence sweeps plus FEM, heat and geometry checks.
inline VerifyReport cmd_verify(const VerifyOptions& opt = {}) {
  struct Task {
    std::string suite;
    std::function<CheckReport()> run;
  };
  std::vector<Task> tasks;
  const std::vector<double> betas{1.0, 2.0, 1.5};
  for (double b : betas)
    for (unsigned q : {0u, 1u, 4u})
      tasks.push_back({"check_tau_bound", [=] { return check_tau_bound(20, b, q, opt.tau_fault); }});
  for (double b : betas)
    for (unsigned q : {0u, 1u, 4u})
      for (std::size_t d = 1; d <= 3; ++d)
        tasks.push_back({"check_upsilon", [=] { return check_upsilon(6, d, b, q); }});
  for (double b : betas)
    for (double sig : {1.0, 0.5})
      for (double C : {1.0, 2.0})
        for (std::size_t d = 1; d <= 3; ++d)
          tasks.push_back({"check_xi_alpha", [=] { return check_xi_alpha(6, d, b, sig, C); }});
  for (double b : betas)
    for (unsigned k : {0u, 1u, 4u})
      for (double C : {1.0, 2.0})
        for (double C0 : {0.0, 1.0})
          tasks.push_back({"check_superlemma", [=] { return check_superlemma(6, 3, b, k, C, C0); }});
  tasks.push_back({"check_identities", [] { return check_identities(20, 3, 8, 3); }});

  tasks.push_back({"fem_spatial", [] {
                     CheckReport r;
                     const std::vector<double> hs{0.4, 0.2, 0.1, 0.05};
                     const auto sr = fem_spatial_rate(hs);
                     r.add<double>("order >= 1.7", 1.7, sr.order);
                     r.add<double>("order <= 2.3", sr.order, 2.3);
                     r.add<double>("|norm - sqrt(pi/48)| <= 5e-4", std::abs(sr.norm_finest - sr.norm_exact), 5e-4);
                     return r;
                   }});
  tasks.push_back({"heat_temporal", [] {
                     CheckReport r;
                     const std::vector<double> dts{0.2, 0.1, 0.05};
                     const auto tr = temporal_rate(0.1, dts, 1.0, 0.05 / 16.0, 5.0, 0.05);
                     r.add<double>("order >= 0.7", 0.7, tr.order);
                     r.add<double>("order <= 1.3", tr.order, 1.3);
                     r.add<double>("steady state diff <= 1e-3", tr.steady_state_diff, 1e-3);
                     return r;
                   }});
  for (const char* e : {"E1", "E2", "E3", "E4"})
    tasks.push_back({"geometry", [e] {
                       CheckReport r;
                       const auto g = geometry_check(e, 20, 100, 0, 2024);
                       const auto sig = geometry_check(e, 100, 0, 1000, 2025);
                       const std::string id(e);
                       r.add<double>(id + " jacobian fd rel err <= 1e-6", g.max_jacobian_rel_error, 1e-6);
                       r.add<double>(id + " A J^T J / det J = I within 1e-12", g.max_identity_error, 1e-12);
                       r.add<double>(id + " sigma_min > 0 (s=100)", 0.0, sig.min_sigma);
                       if (!(sig.min_sigma > 0.0)) r.rows.back().ok = false;
                       return r;
                     }});

  std::vector<CheckReport> results(tasks.size());
  parallel_for(tasks.size(), opt.threads, [&](std::size_t i) { results[i] = tasks[i].run(); });

  VerifyReport out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (out.suites.empty() || out.suites.back().name != tasks[i].suite)
      out.suites.push_back({tasks[i].suite, CheckReport{tasks[i].suite, {}}});
    out.suites.back().report.append(results[i]);
  }
  return out;
}

}  // namespace rdqmc
