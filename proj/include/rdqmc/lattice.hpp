#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace rdqmc {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

inline bool is_power_of_two(std::uint64_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Rank-1 lattice generating vector z for n = 2^m points in s dimensions.
class GeneratingVector {
 public:
  GeneratingVector(std::uint64_t n, std::vector<std::uint64_t> z) : n_(n), z_(std::move(z)) {
    if (!is_power_of_two(n_)) throw ParameterError("lattice size n must be a power of two");
    if (z_.empty()) throw ParameterError("generating vector needs s >= 1");
    for (auto zj : z_)
      if (zj >= n_) throw ParameterError("generating vector component out of range [0, n)");
  }

  std::uint64_t n() const { return n_; }
  std::size_t s() const { return z_.size(); }
  const std::vector<std::uint64_t>& z() const { return z_; }
  std::uint64_t operator[](std::size_t j) const { return z_[j]; }

  GeneratingVector prefix(std::size_t s) const {
    if (s == 0 || s > z_.size()) throw ParameterError("prefix dimension out of range");
    return {n_, {z_.begin(), z_.begin() + static_cast<std::ptrdiff_t>(s)}};
  }

  bool operator==(const GeneratingVector&) const = default;

 private:
  std::uint64_t n_;
  std::vector<std::uint64_t> z_;
};

/// Point t_i = frac(i z / n), i in 1..n. Exact for n a power of two.
inline void lattice_point(const GeneratingVector& gv, std::uint64_t i, std::span<double> out) {
  const std::uint64_t n = gv.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::uint64_t ii = i % n;
  for (std::size_t j = 0; j < gv.s(); ++j) {
    // n is a power of two, so the product mod n is exact in unsigned arithmetic.
    const std::uint64_t k = (ii * gv[j]) & (n - 1);
    out[j] = static_cast<double>(k) * inv_n;
  }
}

/// Row i-1 holds t_i.
inline Matrix generate_points(const GeneratingVector& gv) {
  Matrix pts(gv.n(), gv.s());
  for (std::uint64_t i = 1; i <= gv.n(); ++i) lattice_point(gv, i, pts.row(i - 1));
  return pts;
}

inline double frac(double x) { return x - std::floor(x); }

inline void shift_center(std::span<const double> t, std::span<const double> shift,
                         std::span<double> out) {
  for (std::size_t j = 0; j < t.size(); ++j) out[j] = frac(t[j] + shift[j]) - 0.5;
}

/// frac(t_i + shift) - 1/2 for every row.
inline Matrix shifted_centered_points(const Matrix& points, std::span<const double> shift) {
  if (shift.size() != points.cols)
    throw ParameterError("shift dimension does not match point dimension");
  Matrix out(points.rows, points.cols);
  for (std::size_t i = 0; i < points.rows; ++i) shift_center(points.row(i), shift, out.row(i));
  return out;
}

struct ShiftSet {
  std::size_t R = 0;
  std::size_t s = 0;
  std::uint64_t seed = 0;
  Matrix shifts;

  std::span<const double> shift(std::size_t r) const { return shifts.row(r); }
};

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-mode SplitMix64: element k is mix64(seed + (k+1) * golden gamma).
inline double uniform_at(std::uint64_t seed, std::uint64_t k) {
  const std::uint64_t x = mix64(seed + (k + 1) * 0x9E3779B97F4A7C15ULL);
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline ShiftSet sample_shifts(std::size_t R, std::size_t s, std::uint64_t seed) {
  if (R == 0) throw ParameterError("need at least one shift");
  if (s == 0) throw ParameterError("shift dimension must be positive");
  ShiftSet set{R, s, seed, Matrix(R, s)};
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < s; ++j) set.shifts(r, j) = uniform_at(seed, r * s + j);
  return set;
}

/// Summation block length shared by qmc_mean and the parallel estimator.
inline constexpr std::size_t kSumBlock = 64;

/// Arithmetic mean of equally sized vectors. Values are summed sequentially
/// inside blocks of kSumBlock, then block sums are added in block order.
inline std::vector<double> qmc_mean(std::span<const std::vector<double>> values) {
  if (values.empty()) throw ParameterError("qmc_mean of an empty set");
  const std::size_t len = values[0].size();
  std::vector<double> total(len, 0.0), block(len);
  for (std::size_t b0 = 0; b0 < values.size(); b0 += kSumBlock) {
    std::fill(block.begin(), block.end(), 0.0);
    const std::size_t b1 = std::min(values.size(), b0 + kSumBlock);
    for (std::size_t i = b0; i < b1; ++i) {
      if (values[i].size() != len) throw ParameterError("qmc_mean: length mismatch");
      for (std::size_t k = 0; k < len; ++k) block[k] += values[i][k];
    }
    for (std::size_t k = 0; k < len; ++k) total[k] += block[k];
  }
  const double inv = 1.0 / static_cast<double>(values.size());
  for (auto& v : total) v *= inv;
  return total;
}

inline double qmc_mean(std::span<const double> values) {
  if (values.empty()) throw ParameterError("qmc_mean of an empty set");
  double total = 0.0;
  for (std::size_t b0 = 0; b0 < values.size(); b0 += kSumBlock) {
    double block = 0.0;
    const std::size_t b1 = std::min(values.size(), b0 + kSumBlock);
    for (std::size_t i = b0; i < b1; ++i) block += values[i];
    total += block;
  }
  return total / static_cast<double>(values.size());
}

// Vector file: "# n=<n> s=<s>" then s lines, one integer each.

inline void write_generating_vector(std::ostream& os, const GeneratingVector& gv) {
  os << "# n=" << gv.n() << " s=" << gv.s() << "\n";
  for (auto zj : gv.z()) os << zj << "\n";
}

inline GeneratingVector read_generating_vector(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("generating vector file is empty");
  static const std::regex header(R"(^# n=([0-9]+) s=([0-9]+)\r?$)");
  std::smatch m;
  if (!std::regex_match(line, m, header))
    throw FormatError("malformed generating vector header: '" + line + "'");
  const std::uint64_t n = std::stoull(m[1].str());
  const std::size_t s = std::stoull(m[2].str());
  static const std::regex entry(R"(^([0-9]+)\r?$)");
  std::vector<std::uint64_t> z;
  z.reserve(s);
  while (z.size() < s && std::getline(is, line)) {
    if (!std::regex_match(line, m, entry))
      throw FormatError("malformed generating vector entry: '" + line + "'");
    z.push_back(std::stoull(m[1].str()));
  }
  if (z.size() != s) throw FormatError("generating vector file has fewer than s entries");
  while (std::getline(is, line))
    if (!line.empty() && line != "\r") throw FormatError("trailing content after s entries");
  try {
    return GeneratingVector(n, std::move(z));
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
}

}  // namespace rdqmc
