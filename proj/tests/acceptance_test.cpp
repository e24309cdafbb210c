// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "stlmon/cli.hpp"
#include "support/generators.hpp"
#include "support/naive_oracle.hpp"

using namespace stlmon;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Random (formula, trace) pairs: depth <= 4, 2..50 samples.
template <class Fn>
void for_pairs(std::uint64_t seed, int count, Fn fn) {
  testkit::Gen g(seed);
  for (int i = 0; i < count; ++i) {
    double dt = (i % 4 == 0) ? 0.5 : 1.0;
    Trace t = g.trace(static_cast<std::size_t>(g.uniform_int(2, 50)), dt);
    Formula f = g.formula(4, dt);
    fn(f, t, g);
  }
}

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome oracle_equivalence() {
  auto start = Clock::now();
  int pairs = 0, mismatches = 0;
  for_pairs(101, 2000, [&](const Formula& f, const Trace& t, testkit::Gen&) {
    ++pairs;
    testkit::NaiveOracle oracle(t);
    auto profile = robustness_profile(f, t);
    const auto& root = profile.at("root");
    for (std::size_t k = 0; k < t.size(); ++k)
      if (root[k] != oracle.rho(f, k)) {
        ++mismatches;
        break;
      }
    if (robustness(f, t).rho != oracle.rho(f, 0)) ++mismatches;
  });
  double secs = seconds_since(start);
  std::ostringstream d;
  d << pairs << " pairs, " << mismatches << " mismatches, " << secs << " s";
  return {mismatches == 0 && pairs >= 1000 && secs < 60.0, d.str()};
}

Outcome soundness() {
  int pairs = 0, decided = 0, counterexamples = 0;
  for (std::uint64_t seed : {101ULL, 202ULL}) {
    for_pairs(seed, 2000, [&](const Formula& f, const Trace& t, testkit::Gen&) {
      ++pairs;
      double r = robustness(f, t).rho;
      if (std::abs(r) <= 1e-9) return;
      ++decided;
      if ((r > 0) != boolean_monitor(f, t)) ++counterexamples;
    });
  }
  std::ostringstream d;
  d << decided << " of " << pairs << " pairs decided, " << counterexamples << " counterexamples";
  return {counterexamples == 0 && decided > 0, d.str()};
}

Outcome dualities() {
  int checks = 0, failures = 0;
  for_pairs(101, 2000, [&](const Formula& f, const Trace& t, testkit::Gen& g) {
    double r = robustness(f, t).rho;
    if (robustness(formula::negation(f), t).rho != -r) ++failures;
    Interval i = g.interval(t.dt());
    double gl = robustness(formula::globally(i, f), t).rho;
    double ev = robustness(formula::eventually(i, formula::negation(f)), t).rho;
    if (gl != -ev) ++failures;
    checks += 2;
  });
  std::ostringstream d;
  d << checks << " identities, " << failures << " failures";
  return {failures == 0, d.str()};
}

Outcome performance_kernel() {
  const std::size_t n = 1000000, width = 100;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(0.0, 1000.0);
  std::vector<double> series(n), times(n);
  for (std::size_t i = 0; i < n; ++i) {
    series[i] = dist(rng);
    times[i] = static_cast<double>(i);
  }

  bool match = true;
  for (auto mode : {Extremum::min, Extremum::max}) {
    auto fast = windowed_extremum(series, width, mode);
    for (std::size_t t = 0; t < n && match; ++t) {
      double v = series[t];
      for (std::size_t k = t + 1; k <= std::min(t + width, n - 1); ++k)
        v = mode == Extremum::min ? std::min(v, series[k]) : std::max(v, series[k]);
      match = fast[t] == v;
    }
  }

  std::vector<Channel> ch;
  ch.push_back({"speed", Series::real(series)});
  Trace trace("long", times, ch);
  auto spec = parse_spec("signal speed : real\nrule windowed : G[0, 100] (speed < 900)\n"
                         "rule speed_limit : G[0, inf] (speed < 900)\n");
  auto start = Clock::now();
  double rho_windowed = robustness(spec.rules[0].formula, trace).rho;
  double rho_global = robustness(spec.rules[1].formula, trace).rho;
  double secs = seconds_since(start);

  double expect_windowed = 900 - *std::max_element(series.begin(), series.begin() + width + 1);
  double expect_global = 900 - *std::max_element(series.begin(), series.end());
  bool values = rho_windowed == expect_windowed && rho_global == expect_global;
  std::ostringstream d;
  d << "naive scan " << (match ? "matches" : "differs") << ", G-rule evaluation " << secs << " s";
  return {match && values && secs < 1.0, d.str()};
}

Outcome metrics_definitions() {
  std::vector<double> rho{1.5, -0.5, 2.0};
  auto r = fleet_report("r", rho);
  std::ostringstream d;
  d << "TRV " << r.trv << ", LRV " << r.lrv << ", satisfaction " << cli::pct(r.satisfaction_pct);
  bool pass = r.trv == 3.0 && r.lrv == -0.5 && std::abs(r.satisfaction_pct - 200.0 / 3.0) < 1e-12 &&
              cli::pct(r.satisfaction_pct) == "66.7%";
  return {pass, d.str()};
}

Outcome mann_whitney_exactness() {
  // p depends only on how ranks 1..N split between the samples, so every
  // split enumerates every tie-free sample pair with N <= 8.
  double worst = 0;
  int cases = 0;
  bool exact_method = true;
  for (std::size_t total = 2; total <= 8; ++total) {
    for (std::uint32_t mask = 1; mask + 1 < (1u << total); ++mask) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < total; ++i) ((mask >> i) & 1 ? a : b).push_back(static_cast<double>(i + 1));
      // brute force: U over every relabelling with the same sample sizes
      auto u_of = [&](std::uint32_t m) {
        double u = 0;
        for (std::size_t i = 0; i < total; ++i)
          if ((m >> i) & 1)
            for (std::size_t j = 0; j < total; ++j)
              if (!((m >> j) & 1) && i > j) u += 1;
        return u;
      };
      double u_obs = u_of(mask), lower = 0, upper = 0, all = 0;
      for (std::uint32_t m = 0; m < (1u << total); ++m) {
        if (std::popcount(m) != std::popcount(mask)) continue;
        double u = u_of(m);
        all += 1;
        lower += u <= u_obs;
        upper += u >= u_obs;
      }
      double expected = std::min(1.0, 2.0 * std::min(lower, upper) / all);
      auto res = mann_whitney_u(a, b);
      exact_method = exact_method && res.method == UMethod::exact && res.u_statistic == u_obs;
      worst = std::max(worst, std::abs(res.p_value - expected));
      ++cases;
    }
  }
  std::vector<double> a{1, 2}, b{3, 4};
  double p = mann_whitney_u(a, b).p_value;
  std::ostringstream d;
  d << cases << " splits, max |p - brute force| " << worst << ", p([1,2] vs [3,4]) " << p;
  return {exact_method && worst <= 1e-12 && std::abs(p - 1.0 / 3.0) <= 1e-9, d.str()};
}

Outcome parser_round_trip() {
  const std::string decls =
      "signal x : real\nsignal y : real\nsignal b : bool\nsignal e : enum {p, q, r}\n";
  testkit::Gen g(707);
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    Formula f = g.formula(i % 2 ? 4 : 6, (i % 3) ? 1.0 : 0.5);
    try {
      auto spec = parse_spec(decls + "rule r : " + pretty_print(f) + "\n");
      if (spec.rules.size() != 1 || !(spec.rules[0].formula == f)) ++failures;
    } catch (const ParseError&) {
      ++failures;
    }
  }
  std::mt19937_64 rng(808);
  const std::string alphabet = "GFU[](){},:<>=!-&|+*/.0123456789 \n#abxyinfrulesgtq@\t\"";
  int fuzz = 0, unexpected = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string src;
    std::size_t len = rng() % 80;
    for (std::size_t k = 0; k < len; ++k)
      src += i % 2 ? static_cast<char>(rng() % 256) : alphabet[rng() % alphabet.size()];
    if (i % 3 == 0) src = decls + "rule r : " + src;
    ++fuzz;
    try {
      parse_spec(src);
    } catch (const ParseError&) {
    } catch (...) {
      ++unexpected;
    }
  }
  std::ostringstream d;
  d << "10000 round trips, " << failures << " failures; " << fuzz << " fuzz inputs, " << unexpected
    << " unexpected exceptions";
  return {failures == 0 && unexpected == 0, d.str()};
}

struct LoopRun {
  bool ok = false;
  double seconds = 0;
  std::string error;
  nlohmann::json compare;
  std::string compare_text;
};

int cli(std::vector<std::string> args, std::string& out, std::string& err) {
  std::ostringstream o, e;
  int code = cli::run(args, o, e);
  out = o.str();
  err = e.str();
  return code;
}

LoopRun end_to_end(const fs::path& root) {
  LoopRun run;
  fs::remove_all(root);
  const std::string spec = std::string(STLMON_SOURCE_DIR) + "/specs/turtlebot.stl";
  auto start = Clock::now();
  std::string out, err;
  for (const char* policy : {"pre", "post"}) {
    int code = cli({"simulate", "--preset", "--policy", policy, "--n", "100", "--seed", "7", "--out",
                    (root / policy).string()},
                   out, err);
    if (code != 0) {
      run.error = "simulate " + std::string(policy) + ": " + err;
      return run;
    }
  }
  int code = cli({"compare", spec, (root / "pre").string(), (root / "post").string(), "--format", "json", "--out",
                  (root / "compare.json").string()},
                 out, err);
  if (code != 0) {
    run.error = "compare: " + err;
    return run;
  }
  run.seconds = seconds_since(start);
  run.compare_text = cli::read_file(root / "compare.json");
  run.compare = nlohmann::json::parse(run.compare_text);
  run.ok = true;
  return run;
}

const fs::path kLoopA = fs::temp_directory_path() / "stlmon_acceptance_a";
const fs::path kLoopB = fs::temp_directory_path() / "stlmon_acceptance_b";

Outcome loop_reproduction() {
  auto run = end_to_end(kLoopA);
  if (!run.ok) return {false, run.error};
  bool pass = run.seconds < 120.0;
  std::ostringstream d;
  for (const char* rule : {"sharp_turn", "goal", "linger"}) {
    if (!run.compare.contains(rule)) return {false, std::string("no result for rule ") + rule};
    const auto& c = run.compare[rule];
    double pre_sat = c["pre"]["satisfaction_pct"], post_sat = c["post"]["satisfaction_pct"];
    double pre_trv = c["pre"]["trv"], post_trv = c["post"]["trv"];
    double p = c["p_value"];
    pass = pass && post_sat > pre_sat && p < 0.05 && post_trv > pre_trv;
    d << rule << ": sat " << cli::pct(pre_sat) << " -> " << cli::pct(post_sat) << ", TRV "
      << cli::num(pre_trv) << " -> " << cli::num(post_trv) << ", p " << p << "; ";
  }
  d << run.seconds << " s";
  return {pass, d.str()};
}

Outcome percent_change() {
  double a = satisfaction_change_pct(30, 83);
  double b = satisfaction_change_pct(8, 99);
  std::string a1 = format_change(a), a0 = format_change(a, 0);
  std::string b1 = format_change(b), b0 = format_change(b, 0);
  bool pass = std::abs(a - 176.66666666666666) < 1e-9 && std::abs(b - 1137.5) < 1e-9 && a1 == "+176.7%" &&
              a0 == "+177%" && b1 == "+1137.5%" && b0 == "+1138%";
  return {pass, a1 + " (" + a0 + "), " + b1 + " (" + b0 + ")"};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) names.push_back(fs::relative(e.path(), a).string());
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count_b;
  if (names.size() != count_b) {
    why = "file counts differ";
    return false;
  }
  for (const auto& n : names) {
    if (!fs::exists(b / n) || cli::read_file(a / n) != cli::read_file(b / n)) {
      why = n + " differs";
      return false;
    }
  }
  why = std::to_string(names.size()) + " files byte-identical";
  return true;
}

Outcome determinism() {
  if (!fs::exists(kLoopA / "compare.json")) {
    auto first = end_to_end(kLoopA);
    if (!first.ok) return {false, first.error};
  }
  auto second = end_to_end(kLoopB);
  if (!second.ok) return {false, second.error};
  std::string why;
  bool pass = same_tree(kLoopA, kLoopB, why);
  return {pass, why};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"soundness", soundness},
      {"dualities", dualities},
      {"performance kernel", performance_kernel},
      {"metrics definitions", metrics_definitions},
      {"mann-whitney exactness", mann_whitney_exactness},
      {"parser round trip", parser_round_trip},
      {"end-to-end loop", loop_reproduction},
      {"percent change", percent_change},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  fs::remove_all(kLoopA);
  fs::remove_all(kLoopB);
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
