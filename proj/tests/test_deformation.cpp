#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rdqmc/deformation.hpp"

using namespace rdqmc;

namespace {

struct Sample {
  Vec2 x;
  std::vector<double> y;
};

std::vector<Sample> random_samples(std::size_t count, std::size_t s, std::uint64_t seed, double r_min = 0.1,
                                   double r_max = 0.99) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Sample> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double r = r_min + (r_max - r_min) * U(rng);
    const double a = 2.0 * std::numbers::pi * U(rng);
    Sample smp{{r * std::cos(a), r * std::sin(a)}, std::vector<double>(s)};
    for (auto& v : smp.y) v = U(rng) - 0.5;
    out.push_back(smp);
  }
  return out;
}

// V(x,y) evaluated term by term from the field definition.
Vec2 direct_displacement(bool exponential, double theta, const Vec2& x, const std::vector<double>& y) {
  double a = 0.0;
  for (std::size_t j = 1; j <= y.size(); ++j) {
    const double t = y[j - 1];
    const double xi = exponential ? (t + 0.5 <= 0.0 ? 0.0 : std::exp(-1.0 / (t + 0.5))) : t;
    a += xi * std::pow(static_cast<double>(j), -theta) *
         std::sin(3.0 * static_cast<double>(j) * (std::atan2(x[0], x[1]) + std::numbers::pi));
  }
  return {x[0] + a * x[0], x[1] + a * x[1]};
}

const std::vector<std::string> kExperiments{"E1", "E2", "E3", "E4"};

}  // namespace

TEST(Deformation, ExperimentDefinitions) {
  const auto e1 = PerturbationField::experiment("E1", 5);
  const auto e2 = PerturbationField::experiment("E2", 5);
  const auto e3 = PerturbationField::experiment("E3", 5);
  const auto e4 = PerturbationField::experiment("E4", 5);
  EXPECT_EQ(e1.kind, XiKind::Linear);
  EXPECT_EQ(e2.kind, XiKind::Exponential);
  EXPECT_EQ(e3.kind, XiKind::Linear);
  EXPECT_EQ(e4.kind, XiKind::Exponential);
  EXPECT_EQ(e1.theta, 2.1);
  EXPECT_EQ(e2.theta, 2.1);
  EXPECT_EQ(e3.theta, 2.5);
  EXPECT_EQ(e4.theta, 2.5);
  EXPECT_EQ(PerturbationField::experiment("E1", 5, 3.0).theta, 3.0);
  EXPECT_THROW(PerturbationField::experiment("E5", 5), ParameterError);
  EXPECT_THROW(PerturbationField(XiKind::Linear, 2.0, 3), ParameterError);
  EXPECT_THROW(PerturbationField(XiKind::Linear, 2.1, 0), ParameterError);
}

TEST(Deformation, XiVariants) {
  EXPECT_EQ(xi(XiKind::Linear, 0.3), 0.3);
  EXPECT_NEAR(xi(XiKind::Exponential, 0.0), std::exp(-2.0), 1e-16);
  EXPECT_NEAR(xi(XiKind::Exponential, 0.0), 0.13534, 5e-6);
  EXPECT_EQ(xi(XiKind::Exponential, -0.5), 0.0);
  EXPECT_NEAR(xi(XiKind::Exponential, 0.5), std::exp(-1.0), 1e-16);
}

TEST(Deformation, DisplacementExamples) {
  const auto e1 = PerturbationField::experiment("E1", 1);
  const std::vector<double> half{0.5};
  const Vec2 v = displacement(e1, {1.0, 0.0}, half);
  EXPECT_NEAR(v[0], 1.5, 1e-15);
  EXPECT_NEAR(v[1], 0.0, 1e-15);

  const auto e1s = PerturbationField::experiment("E1", 7);
  const std::vector<double> zero(7, 0.0);
  const Vec2 x{0.3, -0.4};
  EXPECT_EQ(displacement(e1s, x, zero), x);

  const auto e2 = PerturbationField::experiment("E2", 7);
  const Vec2 w = displacement(e2, x, zero);
  EXPECT_GT(std::hypot(w[0] - x[0], w[1] - x[1]), 1e-3);

  for (const auto& id : kExperiments) {
    const auto f = PerturbationField::experiment(id, 9);
    for (const auto& smp : random_samples(20, 9, 4)) {
      const Vec2 ref = direct_displacement(f.kind == XiKind::Exponential, f.theta, smp.x, smp.y);
      const Vec2 got = displacement(f, smp.x, smp.y);
      const Vec2 ev = evaluate(f, smp.x, smp.y).V;
      EXPECT_NEAR(got[0], ref[0], 1e-14);
      EXPECT_NEAR(got[1], ref[1], 1e-14);
      EXPECT_NEAR(ev[0], ref[0], 1e-14);
      EXPECT_NEAR(ev[1], ref[1], 1e-14);
    }
  }
  EXPECT_THROW(displacement(e1s, x, half), ParameterError);
}

TEST(Deformation, JacobianMatchesFiniteDifferences) {
  const double step = 1e-5;
  for (const auto& id : kExperiments) {
    const auto f = PerturbationField::experiment(id, 20);
    for (const auto& smp : random_samples(100, 20, 21)) {
      const Mat2 J = jacobian(f, smp.x, smp.y);
      double num = 0.0;
      const double den = std::max({std::abs(J.a), std::abs(J.b), std::abs(J.c), std::abs(J.d)});
      for (int c = 0; c < 2; ++c) {
        Vec2 xp = smp.x, xm = smp.x;
        xp[c] += step;
        xm[c] -= step;
        const Vec2 vp = direct_displacement(f.kind == XiKind::Exponential, f.theta, xp, smp.y);
        const Vec2 vm = direct_displacement(f.kind == XiKind::Exponential, f.theta, xm, smp.y);
        const double d1 = (vp[0] - vm[0]) / (2 * step), d2 = (vp[1] - vm[1]) / (2 * step);
        num = std::max(num, std::abs((c == 0 ? J.a : J.b) - d1));
        num = std::max(num, std::abs((c == 0 ? J.c : J.d) - d2));
      }
      EXPECT_LE(num / den, 1e-6) << id;
    }
  }
}

TEST(Deformation, IdentityAtZeroParameter) {
  const auto f = PerturbationField::experiment("E1", 10);
  const std::vector<double> zero(10, 0.0);
  for (const auto& smp : random_samples(10, 10, 2)) {
    const auto fv = evaluate(f, smp.x, zero);
    EXPECT_EQ(fv.J.a, 1.0);
    EXPECT_EQ(fv.J.b, 0.0);
    EXPECT_EQ(fv.J.c, 0.0);
    EXPECT_EQ(fv.J.d, 1.0);
    EXPECT_EQ(fv.detJ, 1.0);
    const ScalarFn fsrc = [](const Vec2& p) { return p[0] + 2.0 * p[1]; };
    const ScalarFn u0 = [](const Vec2& p) { return p[0] * p[1]; };
    const auto ps = pullback_data(f, fsrc, u0).sample(smp.x, zero);
    EXPECT_EQ(ps.A.a, 1.0);
    EXPECT_EQ(ps.A.b, 0.0);
    EXPECT_EQ(ps.A.d, 1.0);
    EXPECT_EQ(ps.f_ref, fsrc(smp.x));
    EXPECT_EQ(ps.u0_hat, u0(smp.x));
  }
  std::vector<Vec2> xs;
  for (const auto& smp : random_samples(50, 1, 8)) xs.push_back(smp.x);
  const std::vector<std::vector<double>> ys(3, zero);
  const auto range = singular_value_range(f, xs, ys);
  EXPECT_NEAR(range.min, 1.0, 1e-15);
  EXPECT_NEAR(range.max, 1.0, 1e-15);
  EXPECT_FALSE(range.near_violation);
}

TEST(Deformation, PullbackIdentityAndSymmetry) {
  for (const auto& id : kExperiments) {
    const auto f = PerturbationField::experiment(id, 30);
    const ScalarFn one = [](const Vec2&) { return 1.0; };
    const ScalarFn sq = [](const Vec2& p) { return p[0] * p[0] + p[1] * p[1]; };
    const auto data = pullback_data(f, one, sq);
    for (const auto& smp : random_samples(100, 30, 13)) {
      const auto fv = evaluate(f, smp.x, smp.y);
      const auto ps = data.sample(smp.x, smp.y);
      EXPECT_EQ(ps.A.b, ps.A.c);
      EXPECT_GT(ps.A.a, 0.0);
      EXPECT_GT(ps.A.det(), 0.0);
      const Mat2 I = ps.A * (fv.J.transpose() * fv.J) * (1.0 / fv.detJ);
      EXPECT_NEAR(I.a, 1.0, 1e-12);
      EXPECT_NEAR(I.b, 0.0, 1e-12);
      EXPECT_NEAR(I.c, 0.0, 1e-12);
      EXPECT_NEAR(I.d, 1.0, 1e-12);
      EXPECT_DOUBLE_EQ(ps.f_ref, fv.detJ);
      EXPECT_NEAR(ps.u0_hat, sq(fv.V), 1e-15);
      const auto sv = singular_values(fv.J);
      EXPECT_NEAR(sv[0] * sv[1], fv.detJ, 1e-12 * fv.detJ);
    }
  }
}

TEST(Deformation, SingularValuesStayPositive) {
  for (const auto& id : kExperiments) {
    const auto f = PerturbationField::experiment(id, 100);
    double smin = 1e300;
    for (const auto& smp : random_samples(1000, 100, 77, 1e-3, 1.0))
      smin = std::min(smin, singular_values(jacobian(f, smp.x, smp.y))[0]);
    EXPECT_GT(smin, 0.0) << id;
  }
  const Mat2 m{3.0, 0.0, 0.0, 0.5};
  EXPECT_NEAR(singular_values(m)[0], 0.5, 1e-15);
  EXPECT_NEAR(singular_values(m)[1], 3.0, 1e-15);
}

TEST(Deformation, FoldAndOriginErrors) {
  FieldValue bad;
  bad.J = {-1.0, 0.0, 0.0, 1.0};
  bad.detJ = -1.0;
  try {
    pullback_from(bad, {0.25, 0.5}, nullptr, nullptr);
    FAIL() << "expected a fold error";
  } catch (const DeformationFold& e) {
    EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
  }
  const auto f = PerturbationField::experiment("E1", 3);
  const std::vector<double> y{0.1, 0.2, 0.3};
  EXPECT_THROW(jacobian(f, {0.0, 0.0}, y), OriginSingularity);
  const std::vector<double> zero(3, 0.0);
  EXPECT_NO_THROW(jacobian(f, {0.0, 0.0}, zero));
}

TEST(Deformation, BSequence) {
  const auto b = b_sequence(2.5, 10);
  EXPECT_EQ(b[0], 1.0);
  EXPECT_NEAR(b[1], std::pow(2.0, -1.5), 1e-16);
  EXPECT_NEAR(b[1], 0.35355, 5e-6);
  for (std::size_t j = 1; j < b.size(); ++j) EXPECT_LT(b[j], b[j - 1]);
  EXPECT_THROW(b_sequence(2.0, 3), ParameterError);
}

TEST(Deformation, TruncationEvaluatesTailAtZero) {
  for (const auto& id : kExperiments) {
    const auto f = PerturbationField::experiment(id, 12);
    for (const auto& smp : random_samples(10, 12, 31)) {
      for (std::size_t sp : {1u, 4u, 12u}) {
        auto padded = smp.y;
        for (std::size_t j = sp; j < padded.size(); ++j) padded[j] = 0.0;
        const Vec2 a = displacement(truncate(f, sp), smp.x, smp.y);
        const Vec2 b = displacement(f, smp.x, padded);
        EXPECT_EQ(a, b);
        const Mat2 Ja = jacobian(truncate(f, sp), smp.x, smp.y);
        const Mat2 Jb = jacobian(f, smp.x, padded);
        EXPECT_EQ(Ja.a, Jb.a);
        EXPECT_EQ(Ja.d, Jb.d);
      }
      EXPECT_EQ(displacement(truncate(f, 12), smp.x, smp.y), displacement(f, smp.x, smp.y));
    }
  }
  const auto e2 = PerturbationField::experiment("E2", 4);
  const std::vector<double> y{0.2, 0.0, 0.0, 0.0};
  const Vec2 x{0.6, 0.3};
  const Vec2 tr = displacement(truncate(e2, 1), x, y);
  const Vec2 first = direct_displacement(true, 2.1, x, std::vector<double>{0.2});
  EXPECT_GT(std::abs(tr[0] - first[0]), 1e-4);
  EXPECT_THROW(truncate(e2, 0), ParameterError);
  EXPECT_THROW(truncate(e2, 5), ParameterError);
}

TEST(Deformation, TruncationErrorShrinks) {
  const auto f = PerturbationField::experiment("E1", 64);
  const auto smp = random_samples(200, 64, 5);
  double prev = 1e300;
  for (std::size_t sp : {2u, 8u, 32u, 64u}) {
    double worst = 0.0;
    for (const auto& p : smp) {
      const Vec2 a = displacement(truncate(f, sp), p.x, p.y);
      const Vec2 b = displacement(f, p.x, p.y);
      worst = std::max(worst, std::hypot(a[0] - b[0], a[1] - b[1]));
    }
    EXPECT_LT(worst, prev);
    prev = worst;
  }
  EXPECT_EQ(prev, 0.0);
}
