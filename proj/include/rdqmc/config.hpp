#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubature.hpp"
#include "deformation.hpp"
#include "errors.hpp"

namespace rdqmc {

using Json = nlohmann::json;

struct CbcConfig {
  std::optional<double> p;  // unset: 1/(theta-1) + p_offset
  double p_offset = 0.01;
  double epsilon = 0.1;
  double C = 1.0;
  double beta = 1.0;
  std::string vector_dir;  // empty: construct in-process

  bool operator==(const CbcConfig&) const = default;
};

struct TruncationConfig {
  std::size_t s_ref = 64;
  std::vector<std::size_t> levels{2, 4, 8, 16};
  int m = 10;
  std::string problem = "poisson";

  bool operator==(const TruncationConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  bool record_wall_time = true;

  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  std::string experiment = "E1";
  std::size_t s = 20;
  std::optional<double> theta;  // unset: experiment default
  double mesh_width = 0.2;
  double time_step = 0.1;
  double final_time = 1.0;
  std::vector<int> m_list{4, 5, 6, 7, 8, 9, 10};
  std::size_t shifts = 8;
  std::uint64_t seed = 42;
  std::string source = "one";
  std::string initial = "zero";
  CbcConfig cbc;
  TruncationConfig truncation;
  OutputConfig output;

  bool operator==(const ExperimentConfig&) const = default;

  double resolved_theta() const { return PerturbationField::experiment(experiment, 1, theta.value_or(0.0)).theta; }
};

inline constexpr int kMaxM = 24;

/// f selector: "one" (f = 1) or "gaussian" (f = exp(-|x|^2)).
inline ScalarFn source_function(const std::string& name) {
  if (name == "one") return [](const Vec2&) { return 1.0; };
  if (name == "gaussian") return [](const Vec2& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1])); };
  throw ParameterError("unknown source '" + name + "' (expected one|gaussian)");
}

/// u0 selector: "zero", "parabola" (1 - |x|^2) or "eigenmode" (J0(j01 |x|)).
inline ScalarFn initial_function(const std::string& name) {
  if (name == "zero") return [](const Vec2&) { return 0.0; };
  if (name == "parabola") return [](const Vec2& x) { return 1.0 - x[0] * x[0] - x[1] * x[1]; };
  if (name == "eigenmode")
    return [](const Vec2& x) { return std::cyl_bessel_j(0.0, 2.404825557695773 * std::hypot(x[0], x[1])); };
  throw ParameterError("unknown initial '" + name + "' (expected zero|parabola|eigenmode)");
}

inline Problem parse_problem(const std::string& name) {
  if (name == "poisson") return Problem::Poisson;
  if (name == "heat") return Problem::Heat;
  throw ParameterError("unknown problem '" + name + "' (expected poisson|heat)");
}

inline void validate(const ExperimentConfig& c) {
  (void)PerturbationField::experiment(c.experiment, 1, c.theta.value_or(0.0));
  if (c.theta && !(*c.theta > 2.0)) throw ParameterError("theta must exceed 2");
  if (c.s < 1) throw ParameterError("s must be >= 1");
  if (!(c.mesh_width > 0.0 && c.mesh_width <= 1.0)) throw ParameterError("mesh_width must lie in (0,1]");
  (void)step_count(c.time_step, c.final_time);
  if (c.m_list.empty()) throw ParameterError("m_list must not be empty");
  for (int m : c.m_list)
    if (m < 1 || m > kMaxM) throw ParameterError("m_list entries must lie in [1," + std::to_string(kMaxM) + "]");
  if (c.shifts < 2) throw ParameterError("shifts must be >= 2");
  (void)source_function(c.source);
  (void)initial_function(c.initial);
  if (c.cbc.p && !(*c.cbc.p > 0.0 && *c.cbc.p < 1.0)) throw ParameterError("cbc.p must lie in (0,1)");
  if (!(c.cbc.p_offset > 0.0)) throw ParameterError("cbc.p_offset must be positive");
  if (!(c.cbc.epsilon > 0.0 && c.cbc.epsilon < 0.5)) throw ParameterError("cbc.epsilon must lie in (0,1/2)");
  if (!(c.cbc.C > 0.0)) throw ParameterError("cbc.C must be positive");
  if (!(c.cbc.beta >= 1.0)) throw ParameterError("cbc.beta must be >= 1");
  if (c.truncation.s_ref < 1) throw ParameterError("truncation.s_ref must be >= 1");
  if (c.truncation.levels.empty()) throw ParameterError("truncation.levels must not be empty");
  for (auto l : c.truncation.levels)
    if (l < 1 || l > c.truncation.s_ref) throw ParameterError("truncation levels must lie in [1, s_ref]");
  if (c.truncation.m < 1 || c.truncation.m > kMaxM) throw ParameterError("truncation.m out of range");
  (void)parse_problem(c.truncation.problem);
  if (c.output.dir.empty()) throw ParameterError("output.dir must not be empty");
}

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw FormatError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("bad value for '" + (where.empty() ? "" : where + ".") + key + "'");
  }
}

template <class T>
void read_optional(const Json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read(j, key, v, where);
  out = v;
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["s"] = c.s;
  if (c.theta) j["theta"] = *c.theta;
  j["mesh_width"] = c.mesh_width;
  j["time_step"] = c.time_step;
  j["final_time"] = c.final_time;
  j["m_list"] = c.m_list;
  j["shifts"] = c.shifts;
  j["seed"] = c.seed;
  j["source"] = c.source;
  j["initial"] = c.initial;
  Json cbc;
  if (c.cbc.p) cbc["p"] = *c.cbc.p;
  cbc["p_offset"] = c.cbc.p_offset;
  cbc["epsilon"] = c.cbc.epsilon;
  cbc["C"] = c.cbc.C;
  cbc["beta"] = c.cbc.beta;
  cbc["vector_dir"] = c.cbc.vector_dir;
  j["cbc"] = cbc;
  j["truncation"] = {{"s_ref", c.truncation.s_ref},
                     {"levels", c.truncation.levels},
                     {"m", c.truncation.m},
                     {"problem", c.truncation.problem}};
  j["output"] = {{"dir", c.output.dir}, {"record_wall_time", c.output.record_wall_time}};
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected at every level.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::read;
  detail::reject_unknown(j,
                         {"experiment", "s", "theta", "mesh_width", "time_step", "final_time", "m_list", "shifts",
                          "seed", "source", "initial", "cbc", "truncation", "output"},
                         "");
  ExperimentConfig c;
  read(j, "experiment", c.experiment, "");
  read(j, "s", c.s, "");
  detail::read_optional(j, "theta", c.theta, "");
  read(j, "mesh_width", c.mesh_width, "");
  read(j, "time_step", c.time_step, "");
  read(j, "final_time", c.final_time, "");
  read(j, "m_list", c.m_list, "");
  read(j, "shifts", c.shifts, "");
  read(j, "seed", c.seed, "");
  read(j, "source", c.source, "");
  read(j, "initial", c.initial, "");
  if (j.contains("cbc")) {
    const Json& b = j.at("cbc");
    detail::reject_unknown(b, {"p", "p_offset", "epsilon", "C", "beta", "vector_dir"}, "cbc");
    detail::read_optional(b, "p", c.cbc.p, "cbc");
    read(b, "p_offset", c.cbc.p_offset, "cbc");
    read(b, "epsilon", c.cbc.epsilon, "cbc");
    read(b, "C", c.cbc.C, "cbc");
    read(b, "beta", c.cbc.beta, "cbc");
    read(b, "vector_dir", c.cbc.vector_dir, "cbc");
  }
  if (j.contains("truncation")) {
    const Json& t = j.at("truncation");
    detail::reject_unknown(t, {"s_ref", "levels", "m", "problem"}, "truncation");
    read(t, "s_ref", c.truncation.s_ref, "truncation");
    read(t, "levels", c.truncation.levels, "truncation");
    read(t, "m", c.truncation.m, "truncation");
    read(t, "problem", c.truncation.problem, "truncation");
  }
  if (j.contains("output")) {
    const Json& o = j.at("output");
    detail::reject_unknown(o, {"dir", "record_wall_time"}, "output");
    read(o, "dir", c.output.dir, "output");
    read(o, "record_wall_time", c.output.record_wall_time, "output");
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// FNV-1a over the canonical JSON without output.dir, so the same experiment
/// written to different directories carries the same hash.
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j["output"].erase("dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace rdqmc
