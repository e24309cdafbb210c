#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "stlmon/metrics.hpp"

using namespace stlmon;

namespace {

// Two-sided exact p by listing every labelling of the pooled sample.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), na = a.size();
  auto u_of = [&](const std::vector<bool>& in_a) {
    double u = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (in_a[i])
        for (std::size_t j = 0; j < n; ++j)
          if (!in_a[j] && pooled[i] > pooled[j]) u += 1;
    return u;
  };
  std::vector<bool> observed(n, false);
  std::fill(observed.begin(), observed.begin() + static_cast<std::ptrdiff_t>(na), true);
  const double u_obs = u_of(observed);
  std::vector<bool> mask(n, false);
  std::fill(mask.end() - static_cast<std::ptrdiff_t>(na), mask.end(), true);
  double total = 0, lower = 0, upper = 0;
  do {
    double u = u_of(mask);
    total += 1;
    if (u <= u_obs) lower += 1;
    if (u >= u_obs) upper += 1;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

std::vector<double> distinct_sample(std::mt19937_64& rng, std::size_t n, std::vector<double>& used) {
  std::vector<double> out;
  while (out.size() < n) {
    double v = std::uniform_real_distribution<double>(-10, 10)(rng);
    if (std::find(used.begin(), used.end(), v) != used.end()) continue;
    used.push_back(v);
    out.push_back(v);
  }
  return out;
}

FleetReport report_of(std::vector<double> rho, const std::string& rule = "r") {
  return fleet_report(rule, std::span<const double>(rho));
}

}  // namespace

TEST(FleetReport, Definitions) {
  auto r = report_of({1.5, -0.5, 2.0});
  EXPECT_EQ(r.trv, 3.0);
  EXPECT_EQ(r.lrv, -0.5);
  EXPECT_NEAR(r.satisfaction_pct, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(r.n_traces, 3u);
  EXPECT_EQ(r.rho_values, (std::vector<double>{1.5, -0.5, 2.0}));
}

TEST(FleetReport, AllUnitRobustness) {
  auto r = report_of(std::vector<double>(100, 1.0));
  EXPECT_EQ(r.trv, 100.0);
  EXPECT_EQ(r.lrv, 1.0);
  EXPECT_EQ(r.satisfaction_pct, 100.0);
}

TEST(FleetReport, ZeroCountsAsSatisfied) {
  auto r = report_of({0.0});
  EXPECT_EQ(r.trv, 0.0);
  EXPECT_EQ(r.lrv, 0.0);
  EXPECT_EQ(r.satisfaction_pct, 100.0);
}

TEST(FleetReport, EmptyAndMixedRules) {
  EXPECT_THROW(report_of({}), MetricsError);
  std::vector<RobustnessResult> mixed{{"a", 1.0, Verdict::satisfied}, {"b", 1.0, Verdict::satisfied}};
  EXPECT_THROW(fleet_report("a", std::span<const RobustnessResult>(mixed)), MetricsError);
  std::vector<RobustnessResult> same{{"a", 1.0, Verdict::satisfied}, {"a", -2.0, Verdict::violated}};
  auto r = fleet_report("a", std::span<const RobustnessResult>(same));
  EXPECT_EQ(r.trv, -1.0);
  EXPECT_EQ(r.satisfaction_pct, 50.0);
}

TEST(FleetReport, ConcatenationMerges) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng() % 20), b(1 + rng() % 20);
    // quarter-steps keep sums exact so the merge is an equality
    for (double& x : a) x = static_cast<double>(static_cast<int>(rng() % 41) - 20) * 0.25;
    for (double& x : b) x = static_cast<double>(static_cast<int>(rng() % 41) - 20) * 0.25;
    std::vector<double> ab(a);
    ab.insert(ab.end(), b.begin(), b.end());
    auto ra = report_of(a), rb = report_of(b), rab = report_of(ab);
    EXPECT_EQ(rab.trv, ra.trv + rb.trv);
    EXPECT_EQ(rab.lrv, std::min(ra.lrv, rb.lrv));
    EXPECT_LE(rab.lrv, rab.trv / static_cast<double>(rab.n_traces));
  }
}

TEST(MannWhitney, ExactSmallExample) {
  std::vector<double> a{1, 2}, b{3, 4};
  auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.u_statistic, 0.0);
  EXPECT_EQ(r.method, UMethod::exact);
  EXPECT_NEAR(r.p_value, 1.0 / 3.0, 1e-9);
}

TEST(MannWhitney, IdenticalSamples) {
  std::vector<double> a{5, 5}, b{5, 5};
  auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.u_statistic, 2.0);
  EXPECT_EQ(r.method, UMethod::normal_approx);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(MannWhitney, SeparatedLargeSamples) {
  std::vector<double> a(30), b(30);
  std::iota(a.begin(), a.end(), 1.0);
  std::iota(b.begin(), b.end(), 31.0);
  auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.method, UMethod::normal_approx);
  EXPECT_EQ(r.u_statistic, 0.0);
  EXPECT_LT(r.p_value, 1e-9);
  // scipy.stats.mannwhitneyu(..., method="asymptotic", use_continuity=True)
  EXPECT_NEAR(r.p_value, 3.019859359162157e-11, 1e-20);
}

TEST(MannWhitney, ReferenceValues) {
  // frozen from scipy.stats.mannwhitneyu, two-sided
  std::vector<double> a{1, 2, 2, 3, 5, 5, 7, 8, 9, 9, 10, 11}, b{2, 4, 5, 6, 6, 8, 9, 12, 13, 13, 14, 15};
  auto tied = mann_whitney_u(a, b);
  EXPECT_EQ(tied.u_statistic, 44.5);
  EXPECT_NEAR(tied.p_value, 0.11782839065573798, 1e-12);

  std::vector<double> c{0.3, 1.7, 2.2, 4.1, 5.5, 0.9}, d{3.3, 6.1, 7.4, 2.9, 8.8, 9.0, 10.2};
  auto exact = mann_whitney_u(c, d);
  EXPECT_EQ(exact.method, UMethod::exact);
  EXPECT_EQ(exact.u_statistic, 4.0);
  EXPECT_NEAR(exact.p_value, 0.013986013986013986, 1e-12);

  std::vector<double> e{1.5, 2.5, 3.5, 10.5, 11.5, 12.5, 13.5, 14.5, 15.5, 16.5, 17.5},
      f{4.25, 5.25, 6.25, 7.25, 8.25, 9.25, 0.25, 18.25, 19.25, 20.25, 21.25, 22.25};
  auto big = mann_whitney_u(e, f);
  EXPECT_EQ(big.method, UMethod::normal_approx);
  EXPECT_EQ(big.u_statistic, 59.0);
  EXPECT_NEAR(big.p_value, 0.6891216451070523, 1e-12);
}

TEST(MannWhitney, ExactMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (std::size_t total = 2; total <= 8; ++total) {
    for (std::size_t na = 1; na < total; ++na) {
      for (int trial = 0; trial < 15; ++trial) {
        std::vector<double> used;
        auto a = distinct_sample(rng, na, used);
        auto b = distinct_sample(rng, total - na, used);
        auto r = mann_whitney_u(a, b);
        ASSERT_EQ(r.method, UMethod::exact);
        EXPECT_NEAR(r.p_value, brute_force_p(a, b), 1e-12);
      }
    }
  }
}

TEST(MannWhitney, ExactCountsSumToBinomial) {
  for (std::size_t m = 0; m <= 10; ++m)
    for (std::size_t n = 0; n <= 10; ++n) {
      auto c = exact_u_counts(m, n);
      ASSERT_EQ(c.size(), m * n + 1);
      double sum = std::accumulate(c.begin(), c.end(), 0.0);
      double binom = 1;
      for (std::size_t k = 1; k <= m; ++k) binom = binom * static_cast<double>(n + k) / static_cast<double>(k);
      EXPECT_NEAR(sum, binom, 1e-6);
      for (std::size_t u = 0; u < c.size(); ++u) EXPECT_EQ(c[u], c[c.size() - 1 - u]);
    }
}

TEST(MannWhitney, Symmetry) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t na = 1 + rng() % 25, nb = 1 + rng() % 25;
    std::vector<double> a(na), b(nb);
    for (double& x : a) x = static_cast<double>(rng() % 15);
    for (double& x : b) x = static_cast<double>(rng() % 15);
    auto ab = mann_whitney_u(a, b), ba = mann_whitney_u(b, a);
    EXPECT_EQ(ab.u_statistic + ba.u_statistic, static_cast<double>(na * nb));
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    EXPECT_GE(ab.u_statistic, 0.0);
    EXPECT_LE(ab.u_statistic, static_cast<double>(na * nb));
  }
}

TEST(MannWhitney, ShiftMonotonicity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(1 + rng() % 20), b(1 + rng() % 20);
    for (double& x : a) x = std::uniform_real_distribution<double>(-3, 3)(rng);
    for (double& x : b) x = std::uniform_real_distribution<double>(-3, 3)(rng);
    double c = std::uniform_real_distribution<double>(0.01, 2)(rng);
    std::vector<double> shifted(a);
    for (double& x : shifted) x += c;
    EXPECT_LE(mann_whitney_u(b, shifted).u_statistic, mann_whitney_u(b, a).u_statistic);
  }
}

TEST(MannWhitney, EmptyOrNanSamples) {
  std::vector<double> empty, one{1.0}, nan{std::nan("")};
  EXPECT_THROW(mann_whitney_u(empty, one), MetricsError);
  EXPECT_THROW(mann_whitney_u(one, empty), MetricsError);
  EXPECT_THROW(mann_whitney_u(one, nan), MetricsError);
}

TEST(PercentChange, RelativeToPre) {
  EXPECT_NEAR(satisfaction_change_pct(30, 83), 176.66666666666666, 1e-9);
  EXPECT_EQ(format_change(satisfaction_change_pct(30, 83)), "+176.7%");
  EXPECT_EQ(format_change(satisfaction_change_pct(30, 83), 0), "+177%");
  EXPECT_EQ(satisfaction_change_pct(8, 99), 1137.5);
  EXPECT_EQ(format_change(satisfaction_change_pct(8, 99)), "+1137.5%");
  EXPECT_EQ(format_change(satisfaction_change_pct(8, 99), 0), "+1138%");
  EXPECT_EQ(format_change(satisfaction_change_pct(50, 50)), "+0.0%");
  EXPECT_EQ(format_change(satisfaction_change_pct(80, 40)), "-50.0%");
  EXPECT_EQ(format_change(satisfaction_change_pct(0, 40)), "n/a");
}

TEST(CompareFleets, SeparatedAndIdentical) {
  std::vector<double> pre, post;
  for (int i = 0; i < 40; ++i) {
    pre.push_back(-1.0 - i * 0.1);
    post.push_back(0.5 + i * 0.1);
  }
  auto c = compare_fleets(report_of(pre), report_of(post));
  EXPECT_TRUE(c.significant);
  EXPECT_LT(c.p_value, 0.05);
  EXPECT_EQ(c.u_statistic, 0.0);
  EXPECT_EQ(format_change(c.satisfaction_change_pct), "n/a");

  auto same = compare_fleets(report_of(post), report_of(post));
  EXPECT_FALSE(same.significant);
  EXPECT_NEAR(same.p_value, 1.0, 1e-9);
  EXPECT_EQ(same.satisfaction_change_pct, 0.0);
}

TEST(CompareFleets, Errors) {
  EXPECT_THROW(compare_fleets(report_of({1}, "a"), report_of({1}, "b")), MetricsError);
  EXPECT_THROW(compare_fleets(report_of({1}), report_of({1}), 0.0), MetricsError);
  EXPECT_THROW(compare_fleets(report_of({1}), report_of({1}), 1.0), MetricsError);
}
