#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "rdqmc/lattice.hpp"

using namespace rdqmc;

TEST(Lattice, FourPointRule) {
  const auto pts = generate_points(GeneratingVector(4, {1, 3}));
  const std::vector<std::array<double, 2>> expected{{0.25, 0.75}, {0.5, 0.5}, {0.75, 0.25}, {0.0, 0.0}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(pts(i, 0), expected[i][0]);
    EXPECT_EQ(pts(i, 1), expected[i][1]);
  }
}

TEST(Lattice, SinglePointIsOrigin) {
  const auto pts = generate_points(GeneratingVector(1, {0, 0, 0}));
  ASSERT_EQ(pts.rows, 1u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(pts(0, j), 0.0);
}

TEST(Lattice, RejectsInvalidVectors) {
  EXPECT_THROW(GeneratingVector(6, {1}), ParameterError);
  EXPECT_THROW(GeneratingVector(8, {}), ParameterError);
  EXPECT_THROW(GeneratingVector(8, {8}), ParameterError);
}

// Every pairwise sum mod 1 of lattice points is again a lattice point.
TEST(Lattice, PointSetIsClosedUnderAddition) {
  std::mt19937_64 rng(5);
  for (std::uint64_t n = 1; n <= 64; n *= 2) {
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<std::uint64_t> z(3);
      for (auto& zj : z) zj = n == 1 ? 0 : rng() % n;
      const auto pts = generate_points(GeneratingVector(n, z));
      std::set<std::vector<double>> members;
      for (std::size_t i = 0; i < n; ++i) members.insert({pts.row(i).begin(), pts.row(i).end()});
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          std::vector<double> sum(3);
          for (std::size_t j = 0; j < 3; ++j) sum[j] = frac(pts(a, j) + pts(b, j));
          ASSERT_TRUE(members.count(sum)) << "n=" << n;
        }
    }
  }
  const auto pts = generate_points(GeneratingVector(8, {1, 5}));
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < 8; ++i) distinct.insert({pts.row(i).begin(), pts.row(i).end()});
  EXPECT_EQ(distinct.size(), 8u);
}

TEST(Lattice, ShiftedCenteredPoints) {
  Matrix pts(1, 1);
  pts(0, 0) = 0.75;
  const std::vector<double> half{0.5};
  EXPECT_EQ(shifted_centered_points(pts, half)(0, 0), -0.25);

  const auto lat = generate_points(GeneratingVector(16, {1, 7, 5}));
  const std::vector<double> zero(3, 0.0);
  const auto c0 = shifted_centered_points(lat, zero);
  for (std::size_t i = 0; i < lat.rows; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(c0(i, j), lat(i, j) - 0.5);

  const auto shifts = sample_shifts(20, 3, 11);
  for (std::size_t r = 0; r < shifts.R; ++r) {
    const auto c = shifted_centered_points(lat, shifts.shift(r));
    for (double v : c.data) {
      EXPECT_GE(v, -0.5);
      EXPECT_LT(v, 0.5);
    }
  }
  EXPECT_THROW(shifted_centered_points(lat, half), ParameterError);
}

TEST(Lattice, ShiftsAreDeterministicAndInRange) {
  const auto a = sample_shifts(2, 3, 7);
  const auto b = sample_shifts(2, 3, 7);
  EXPECT_EQ(a.shifts.data, b.shifts.data);
  EXPECT_NE(a.shifts.data, sample_shifts(2, 3, 8).shifts.data);
  for (double v : sample_shifts(500, 4, 3).shifts.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(sample_shifts(0, 3, 7), ParameterError);
}

TEST(Lattice, ShiftMeanNearOneHalf) {
  const auto set = sample_shifts(1000, 1, 1);
  double mean = 0.0;
  for (double v : set.shifts.data) mean += v;
  mean /= 1000.0;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(Lattice, QmcMeanSmallCases) {
  const std::vector<double> v{1.5, -2.0};
  const std::vector<std::vector<double>> same(5, v);
  EXPECT_EQ(qmc_mean(std::span<const std::vector<double>>(same)), v);
  const std::vector<double> pair{0.0, 1.0};
  EXPECT_EQ(qmc_mean(std::span<const double>(pair)), 0.5);
  EXPECT_THROW(qmc_mean(std::span<const double>()), ParameterError);
}

TEST(Lattice, QmcMeanMatchesSequentialSum) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<std::vector<double>> vals(1024, std::vector<double>(300));
  for (auto& v : vals)
    for (auto& x : v) x = U(rng);
  const auto mean = qmc_mean(std::span<const std::vector<double>>(vals));
  for (std::size_t k = 0; k < 300; ++k) {
    long double acc = 0.0L;
    for (const auto& v : vals) acc += v[k];
    const double ref = static_cast<double>(acc / 1024.0L);
    EXPECT_LE(std::abs(mean[k] - ref), 1e-13 * std::max(1.0, std::abs(ref))) << k;
  }

  auto shuffled = vals;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto mean2 = qmc_mean(std::span<const std::vector<double>>(shuffled));
  for (std::size_t k = 0; k < 300; ++k) EXPECT_NEAR(mean2[k], mean[k], 1e-12);
  EXPECT_EQ(qmc_mean(std::span<const std::vector<double>>(vals)), mean);
}

TEST(Lattice, VectorFileRoundTrip) {
  const GeneratingVector gv(1024, {1, 433, 229, 1011});
  std::stringstream ss;
  write_generating_vector(ss, gv);
  EXPECT_EQ(ss.str(), "# n=1024 s=4\n1\n433\n229\n1011\n");
  EXPECT_EQ(read_generating_vector(ss), gv);
  EXPECT_EQ(gv.prefix(2), GeneratingVector(1024, {1, 433}));
}

TEST(Lattice, VectorFileRejectsMalformedInput) {
  for (const char* text : {"", "n=8 s=1\n1\n", "# n=8 s=2\n1\n", "# n=8 s=1\nx\n", "# n=8 s=1\n1\n3\n",
                           "# n=6 s=1\n1\n", "# n=8 s=1\n9\n"}) {
    std::stringstream ss(text);
    EXPECT_THROW(read_generating_vector(ss), FormatError) << text;
  }
}
