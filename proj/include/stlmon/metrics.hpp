#pragma once

// Fleet-level aggregation of per-trace robustness (TRV, LRV, satisfaction)
// and two-sample comparison with the Mann-Whitney U test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stlmon/robustness.hpp"

namespace stlmon {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FleetReport {
  std::string rule_name;
  std::size_t n_traces = 0;
  double satisfaction_pct = 0.0;  // share of traces with rho >= 0
  double trv = 0.0;               // total robustness: sum of rho
  double lrv = 0.0;               // worst case: min of rho
  std::vector<double> rho_values;
};

inline FleetReport fleet_report(const std::string& rule, std::span<const double> rhos) {
  if (rhos.empty()) throw MetricsError("no traces for rule '" + rule + "'");
  FleetReport r;
  r.rule_name = rule;
  r.n_traces = rhos.size();
  r.rho_values.assign(rhos.begin(), rhos.end());
  r.trv = std::accumulate(rhos.begin(), rhos.end(), 0.0);
  r.lrv = *std::min_element(rhos.begin(), rhos.end());
  auto satisfied = std::count_if(rhos.begin(), rhos.end(), [](double x) { return x >= 0; });
  r.satisfaction_pct = 100.0 * static_cast<double>(satisfied) / static_cast<double>(rhos.size());
  return r;
}

inline FleetReport fleet_report(const std::string& rule, std::span<const RobustnessResult> results) {
  std::vector<double> rhos;
  rhos.reserve(results.size());
  for (const auto& res : results) {
    if (res.rule_name != rule)
      throw MetricsError("result for rule '" + res.rule_name + "' in a report for rule '" + rule + "'");
    rhos.push_back(res.rho);
  }
  return fleet_report(rule, std::span<const double>(rhos));
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

enum class UMethod { exact, normal_approx };

inline const char* to_string(UMethod m) { return m == UMethod::exact ? "exact" : "normal_approx"; }

struct MannWhitneyResult {
  double u_statistic = 0.0;  // U for the first sample
  double p_value = 1.0;      // two-sided
  UMethod method = UMethod::exact;
};

/// Exact-distribution cutoff on the combined sample size (tie-free samples only).
inline constexpr std::size_t kExactUMaxTotal = 20;

/// Midranks (1-based) of the pooled sample, plus the tie term sum(t^3 - t).
inline std::pair<std::vector<double>, double> average_ranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return {ranks, tie_term};
}

/// Null distribution of U for sample sizes (m, n) without ties: counts[u] is
/// the number of the C(m+n, m) arrangements giving U = u.  Built with the
/// recurrence f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u) on the largest item.
inline std::vector<double> exact_u_counts(std::size_t m, std::size_t n) {
  // table[i][j] is the count vector for sizes (i, j), with length i*j + 1
  std::vector<std::vector<std::vector<double>>> table(m + 1, std::vector<std::vector<double>>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      auto& cur = table[i][j];
      cur.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1.0;
        continue;
      }
      const auto& a_last = table[i - 1][j];  // largest is from the first sample: beats all j
      const auto& b_last = table[i][j - 1];
      for (std::size_t u = 0; u < a_last.size(); ++u) cur[u + j] += a_last[u];
      for (std::size_t u = 0; u < b_last.size(); ++u) cur[u] += b_last[u];
    }
  }
  return table[m][n];
}

inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw MetricsError("Mann-Whitney U needs two nonempty samples");
  for (double x : a)
    if (std::isnan(x)) throw MetricsError("Mann-Whitney U sample contains NaN");
  for (double x : b)
    if (std::isnan(x)) throw MetricsError("Mann-Whitney U sample contains NaN");

  const std::size_t na = a.size(), nb = b.size(), total = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto [ranks, tie_term] = average_ranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(total);
  const double u = rank_sum_a - dna * (dna + 1.0) / 2.0;

  MannWhitneyResult out;
  out.u_statistic = u;
  if (total <= kExactUMaxTotal && tie_term == 0.0) {
    out.method = UMethod::exact;
    auto counts = exact_u_counts(na, nb);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto k = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i <= k) lower += counts[i];
      if (i >= k) upper += counts[i];
    }
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return out;
  }

  out.method = UMethod::normal_approx;
  const double mean = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(var);
  out.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Pre/post comparison

/// 100 * (post - pre) / pre; +infinity when pre is zero (rendered "n/a").
inline double satisfaction_change_pct(double pre_pct, double post_pct) {
  if (pre_pct == 0.0) return std::numeric_limits<double>::infinity();
  return 100.0 * (post_pct - pre_pct) / pre_pct;
}

/// Signed percentage with the given number of decimals, or "n/a".
inline std::string format_change(double change_pct, int decimals = 1) {
  if (!std::isfinite(change_pct)) return "n/a";
  char buf[64];
  double scale = std::pow(10.0, decimals);
  double rounded = std::round(change_pct * scale) / scale;
  if (rounded == 0.0) rounded = 0.0;
  std::snprintf(buf, sizeof(buf), "%+.*f%%", decimals, rounded);
  return buf;
}

struct CompareReport {
  std::string rule_name;
  FleetReport pre;
  FleetReport post;
  double u_statistic = 0.0;
  double p_value = 1.0;
  UMethod method = UMethod::exact;
  double alpha = 0.05;
  bool significant = false;
  double satisfaction_change_pct = 0.0;
};

/// Two-sided Mann-Whitney U on the robustness samples; U is reported for the
/// pre-analysis sample.
inline CompareReport compare_fleets(const FleetReport& pre, const FleetReport& post, double alpha = 0.05) {
  if (pre.rule_name != post.rule_name)
    throw MetricsError("cannot compare rule '" + pre.rule_name + "' with rule '" + post.rule_name + "'");
  if (!(alpha > 0 && alpha < 1)) throw MetricsError("alpha must lie in (0, 1)");
  auto mw = mann_whitney_u(pre.rho_values, post.rho_values);
  CompareReport r;
  r.rule_name = pre.rule_name;
  r.pre = pre;
  r.post = post;
  r.u_statistic = mw.u_statistic;
  r.p_value = mw.p_value;
  r.method = mw.method;
  r.alpha = alpha;
  r.significant = mw.p_value < alpha;
  r.satisfaction_change_pct = satisfaction_change_pct(pre.satisfaction_pct, post.satisfaction_pct);
  return r;
}

}  // namespace stlmon
