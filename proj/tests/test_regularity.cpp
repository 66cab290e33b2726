#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rdqmc/regularity.hpp"

using namespace rdqmc;

namespace {

double fact(unsigned n) { return std::tgamma(n + 1.0); }

// tau by the recurrence in long double.
std::vector<long double> tau_direct(unsigned kmax, double beta, unsigned q) {
  std::vector<long double> t(kmax + 1, 0.0L);
  t[0] = 1.0L;
  for (unsigned k = 1; k <= kmax; ++k)
    for (unsigned l = 0; l < k; ++l) t[k] += std::pow(fact(k - l + q) / fact(k - l), beta) * t[l];
  return t;
}

}  // namespace

TEST(Regularity, MultiIndexEnumeration) {
  const auto all = multi_indices(3, 4);
  EXPECT_EQ(all.size(), 35u);  // binom(4+3, 3)
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LE(order(all[i - 1]), order(all[i]));
  EXPECT_EQ(sub_indices({2, 1}).size(), 6u);
  EXPECT_EQ(sub_indices({2, 1}).back(), (MultiIndex{2, 1}));
  EXPECT_EQ(format_index({1, 0, 2}), "(1,0,2)");
  EXPECT_EQ(binomial(MultiIndex{3, 2}, MultiIndex{1, 1}), 6);
  EXPECT_THROW(multi_indices(0, 2), ParameterError);
}

TEST(Regularity, TauValues) {
  const double doubling[] = {1, 1, 2, 4, 8, 16};
  for (unsigned k = 0; k <= 5; ++k) EXPECT_EQ(tau(k, 1.0, 0), doubling[k]);
  EXPECT_EQ(tau(1, 1.0, 1), 2.0);
  EXPECT_EQ(tau(2, 1.0, 1), 7.0);
  EXPECT_EQ(tau(0, 2.0, 4), 1.0);
  EXPECT_EQ(tau_exact(2, 1, 1), Rational(7));
  for (double beta : {1.0, 1.5, 2.0})
    for (unsigned q : {0u, 1u, 4u}) {
      const auto ref = tau_direct(12, beta, q);
      for (unsigned k = 0; k <= 12; ++k)
        EXPECT_NEAR(tau(k, beta, q) / static_cast<double>(ref[k]), 1.0, 1e-12) << k << " " << beta << " " << q;
    }
}

TEST(Regularity, TauBoundExamples) {
  const auto rep = check_tau_bound(2, 1.0, 1);
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[0].lhs, 1.0);
  EXPECT_EQ(rep.rows[0].rhs, 1.0);
  EXPECT_EQ(rep.rows[2].lhs, 7.0);
  EXPECT_EQ(rep.rows[2].rhs, 32.0);
  EXPECT_TRUE(rep.passed());
  EXPECT_THROW(check_tau_bound(31, 1.0, 0), ParameterError);
  EXPECT_THROW(check_tau_bound(5, 0.5, 0), ParameterError);
}

TEST(Regularity, TauBoundSweep) {
  for (double beta : {1.0, 2.0, 1.5})
    for (unsigned q : {0u, 1u, 4u}) {
      const auto rep = check_tau_bound(20, beta, q);
      EXPECT_TRUE(rep.passed()) << beta << " " << q;
      EXPECT_EQ(rep.rows.size(), 21u);
    }
}

TEST(Regularity, InjectedOffsetIsReported) {
  const auto rep = check_tau_bound(10, 1.0, 0, 1);
  EXPECT_FALSE(rep.passed());
  ASSERT_NE(rep.first_failure(), nullptr);
  EXPECT_EQ(rep.first_failure()->tuple, "k=0 beta=1 q=0");
}

TEST(Regularity, UpsilonExamplesAndSweep) {
  const auto one = check_upsilon(1, 1, 1.0, 0);
  ASSERT_EQ(one.rows.size(), 2u);
  EXPECT_EQ(one.rows[0].lhs, 1.0);
  EXPECT_EQ(one.rows[1].lhs, 1.0);
  EXPECT_EQ(one.rows[1].rhs, 1.0);

  // one coordinate: Upsilon_m = sum_{w=1..m} binom(m,w) ((w+q)!)^beta Upsilon_{m-w}
  for (unsigned q : {0u, 1u, 4u}) {
    std::vector<double> u(7, 0.0);
    u[0] = 1.0;
    for (unsigned m = 1; m <= 6; ++m)
      for (unsigned w = 1; w <= m; ++w)
        u[m] += fact(m) / (fact(w) * fact(m - w)) * std::pow(fact(w + q), 2.0) * u[m - w];
    const auto rep = check_upsilon(6, 1, 2.0, q);
    for (unsigned m = 0; m <= 6; ++m) EXPECT_NEAR(rep.rows[m].lhs / u[m], 1.0, 1e-13);
  }
  for (double beta : {1.0, 2.0, 1.5})
    for (unsigned q : {0u, 1u, 4u})
      for (std::size_t d = 1; d <= 3; ++d) EXPECT_TRUE(check_upsilon(6, d, beta, q).passed());
  EXPECT_THROW(check_upsilon(9, 2, 1.0, 0), ParameterError);
}

TEST(Regularity, XiAlphaExamplesAndSweep) {
  const auto rep = check_xi_alpha(1, 1, 1.0);
  // rows: alpha_0, xi_0, alpha_e1, xi_e1
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].lhs, 1.0);
  EXPECT_EQ(rep.rows[0].rhs, 1.0);
  EXPECT_EQ(rep.rows[2].lhs, 1.0);
  EXPECT_EQ(rep.rows[2].rhs, 1.0);

  // xi_e1 = (C / sigma) * xi_0 = C / sigma^2
  const auto scaled = check_xi_alpha(1, 1, 1.0, 0.5, 2.0);
  EXPECT_EQ(scaled.rows[1].lhs, 2.0);
  EXPECT_EQ(scaled.rows[3].lhs, 8.0);
  EXPECT_EQ(scaled.rows[3].rhs, 8.0);

  for (double beta : {1.0, 2.0, 1.5})
    for (double sigma : {1.0, 0.5})
      for (double C : {1.0, 2.0})
        for (std::size_t d = 1; d <= 3; ++d) EXPECT_TRUE(check_xi_alpha(6, d, beta, sigma, C).passed());
  EXPECT_THROW(check_xi_alpha(4, 2, 1.0, 1.5), ParameterError);
  EXPECT_THROW(check_xi_alpha(4, 2, 1.0, 1.0, 0.5), ParameterError);
}

TEST(Regularity, SuperlemmaExamplesAndSweep) {
  const auto base = check_superlemma(0, 1, 1.0, 1, 1.0, 0.5);
  EXPECT_EQ(base.rows[0].lhs, 0.5);
  EXPECT_EQ(base.rows[0].rhs, 1.5);

  // k = 0, C = 1, C0 = 0, beta = 1: along e1, Lambda_n = 2^{n-1} n!
  const auto chain = check_superlemma(6, 1, 1.0, 0, 1.0, 0.0);
  for (unsigned n = 1; n <= 6; ++n) EXPECT_EQ(chain.rows[n].lhs, std::pow(2.0, n - 1.0) * fact(n)) << n;

  for (double beta : {1.0, 2.0, 1.5})
    for (unsigned k : {0u, 1u, 4u})
      for (double C : {1.0, 2.0})
        for (double C0 : {0.0, 1.0}) EXPECT_TRUE(check_superlemma(6, 3, beta, k, C, C0).passed());
  EXPECT_THROW(check_superlemma(4, 2, 1.0, 0, 0.5, 0.0), ParameterError);
  EXPECT_THROW(check_superlemma(4, 2, 1.0, 0, 1.0, -1.0), ParameterError);
}

TEST(Regularity, Identities) {
  const auto rep = check_identities();
  EXPECT_TRUE(rep.passed());
  bool saw_gosper = false, saw_vandermonde = false;
  for (const auto& r : rep.rows) {
    if (r.tuple == "gosper d=1 v=2") {
      saw_gosper = true;
      EXPECT_EQ(r.lhs, 3.0);
      EXPECT_EQ(r.rhs, 3.0);
    }
    if (r.tuple == "vandermonde nu=(1,1,0) l=1") {
      saw_vandermonde = true;
      EXPECT_EQ(r.lhs, 2.0);
      EXPECT_EQ(r.rhs, 2.0);
    }
  }
  EXPECT_TRUE(saw_gosper);
  EXPECT_TRUE(saw_vandermonde);
}

TEST(Regularity, CheckReportTable) {
  CheckReport rep;
  rep.add<double>("a", 1.0, 2.0);
  rep.add<double>("b", 3.0, 2.0);
  EXPECT_EQ(rep.failures(), 1u);
  EXPECT_EQ(rep.first_failure()->tuple, "b");
  EXPECT_DOUBLE_EQ(rep.max_ratio(), 1.5);
  const std::string t = rep.table();
  EXPECT_NE(t.find("FAIL"), std::string::npos);
  EXPECT_NE(t.find("ok"), std::string::npos);
  EXPECT_FALSE(CheckReport{}.passed());
}

TEST(Regularity, BaseConstants) {
  ModelConstants mc;
  const auto b = base_constants(mc);
  EXPECT_EQ(b.C_detJ, 2.0);
  EXPECT_EQ(b.C_A1, 1.0);
  EXPECT_EQ(b.C_A2, 8.0);
  EXPECT_EQ(b.C_fref1, 0.5);
  EXPECT_EQ(b.C_fref2, 4.0);
  mc.C = 3.0;
  mc.beta = 2.0;
  mc.sigma_min = 0.5;
  mc.sigma_max = 2.0;
  const auto c = base_constants(mc);
  EXPECT_DOUBLE_EQ(c.C_detJ, 4.0 * 3.0 / 0.5);
  EXPECT_DOUBLE_EQ(c.C_A1, 4.0 / 0.25);
  EXPECT_DOUBLE_EQ(c.C_A2, c.C_detJ / 0.25 * 9.0 * 16.0);
  EXPECT_DOUBLE_EQ(c.C_fref1, 4.0 / 4.0);
  EXPECT_DOUBLE_EQ(c.C_fref2, 4.0 * 9.0 / 0.5 * 4.0);
}

TEST(Regularity, StationaryBaseline) {
  const auto s = stationary_constants(ModelConstants{});
  // c0 = 1/24, c1 = 16, ct0 = sqrt(pi)/48, ct1 = 4 * ||(1,1)||_1 = 8
  EXPECT_DOUBLE_EQ(s.c0, 1.0 / 24.0);
  EXPECT_DOUBLE_EQ(s.c1, 16.0);
  EXPECT_DOUBLE_EQ(s.ct0, std::sqrt(std::numbers::pi) / 48.0);
  EXPECT_DOUBLE_EQ(s.ct1, 8.0);
  EXPECT_DOUBLE_EQ(s.C_u1, 1.0 + std::sqrt(std::numbers::pi) / 2.0);
  // 16^2 * 4! * 2^{5+1}
  EXPECT_DOUBLE_EQ(s.C_u2, 393216.0);
  EXPECT_GE(s.C_u1, 1.0);
}

TEST(Regularity, ParabolicBaseline) {
  const auto p = parabolic_constants(ModelConstants{});
  EXPECT_DOUBLE_EQ(p.Ct1, 7.0);
  EXPECT_DOUBLE_EQ(p.Ct2, 56.0);
  EXPECT_DOUBLE_EQ(p.C0, 14.0);
  EXPECT_DOUBLE_EQ(p.Ct, 280.0);
  EXPECT_DOUBLE_EQ(p.C_u1, 15.0);
  // 280^2 * 5! * 2^{6+1}
  EXPECT_DOUBLE_EQ(p.C_u2, 1204224000.0);
}

TEST(Regularity, ConstantStructure) {
  ModelConstants mc;
  mc.C_u0 = 2.5;
  mc.M = 1.7;
  mc.sigma_min = 0.8;
  const auto p = parabolic_constants(mc);
  EXPECT_DOUBLE_EQ(p.C_u1, 1.0 + p.C0);
  EXPECT_DOUBLE_EQ(p.C0, p.Ct1 * (1.0 + mc.C_u0));

  double prev = 0.0;
  for (double C : {1.0, 1.5, 2.0, 4.0}) {
    mc.C = C;
    const double v = stationary_constants(mc).C_u2;
    EXPECT_GE(v, prev);
    prev = v;
  }
  mc.C = 1.0;
  prev = 0.0;
  for (double cu0 : {0.5, 1.0, 10.0, 1000.0}) {
    mc.C_u0 = cu0;
    const double v = parabolic_constants(mc).C_u2;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Regularity, RejectsInvalidModelConstants) {
  ModelConstants mc;
  mc.sigma_min = 0.0;
  EXPECT_THROW(stationary_constants(mc), ParameterError);
  mc = ModelConstants{};
  mc.sigma_max = 0.5;
  EXPECT_THROW(parabolic_constants(mc), ParameterError);
  mc = ModelConstants{};
  mc.C = 0.9;
  EXPECT_THROW(base_constants(mc), ParameterError);
  mc = ModelConstants{};
  mc.rho = {-1.0};
  EXPECT_THROW(base_constants(mc), ParameterError);
}
