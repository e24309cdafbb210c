#pragma once

// Quantitative (robustness) and boolean semantics of STL over finite traces.
//
// Time indices run over samples 0..n-1.  A temporal window [t+a, t+b] is
// clipped to the trace end; when it starts past the end it degenerates to the
// final sample.  Robustness of bool/enum atoms is +-1.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlmon/ast.hpp"
#include "stlmon/trace.hpp"

namespace stlmon {

enum class Extremum { min, max };

/// out[t] = extremum of series[t .. min(t + width, n - 1)], in O(n) using a
/// monotonic deque swept from the back.
inline std::vector<double> windowed_extremum(std::span<const double> series, std::size_t width, Extremum mode) {
  const std::size_t n = series.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  auto better = [mode](double a, double b) { return mode == Extremum::min ? a <= b : a >= b; };
  // indices in increasing order, values strictly worse going back to front
  std::deque<std::size_t> dq;
  for (std::size_t k = n; k-- > 0;) {
    while (!dq.empty() && better(series[k], series[dq.front()])) dq.pop_front();
    dq.push_front(k);
    while (dq.back() - k > width) dq.pop_back();
    out[k] = series[dq.back()];
  }
  return out;
}

enum class Verdict { satisfied, exactly_satisfied, violated };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "Satisfied";
    case Verdict::exactly_satisfied: return "ExactlySatisfied";
    case Verdict::violated: return "Violated";
  }
  return "?";
}

inline Verdict verdict_of(double rho) {
  if (rho > 0) return Verdict::satisfied;
  if (rho < 0) return Verdict::violated;
  return Verdict::exactly_satisfied;
}

struct RobustnessResult {
  std::string rule_name;
  double rho = 0.0;
  Verdict verdict = Verdict::exactly_satisfied;
};

/// Node path ("root", "root.0", ...) to that node's per-sample robustness.
using RobustnessProfile = std::map<std::string, std::vector<double>>;

/// Converts a time bound to a sample offset.  Bounds must sit on the sampling
/// grid; unbounded (and huge) bounds saturate to n.
inline std::size_t bound_to_offset(double bound, double dt, std::size_t n) {
  if (std::isinf(bound)) return n;
  double exact = bound / dt;
  double k = std::round(exact);
  if (std::abs(k - exact) > 1e-6)
    throw EvalError("interval bound " + format_real(bound) + " is not a multiple of dt " + format_real(dt));
  if (k >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(k);
}

namespace detail {

inline double atom_value(const EvaluatedSignal& lhs, CompareOp op, const EvaluatedSignal& rhs, std::size_t t) {
  return (op == CompareOp::lt || op == CompareOp::le) ? rhs[t] - lhs[t] : lhs[t] - rhs[t];
}

inline const Series& channel(const Trace& trace, const std::string& name, SignalKind kind) {
  const Series* s = trace.find(name);
  if (!s) throw EvalError("signal '" + name + "' is missing from trace '" + trace.id() + "'");
  if (s->kind != kind)
    throw EvalError("signal '" + name + "' in trace '" + trace.id() + "' is " + to_string(s->kind) +
                    ", expected " + to_string(kind));
  return *s;
}

inline std::vector<double> atom_robustness(const Predicate& p, const Trace& trace) {
  const std::size_t n = trace.size();
  std::vector<double> out(n);
  std::visit(overloaded{
                 [&](const Compare& c) {
                   EvaluatedSignal l = eval_expr(c.lhs, trace);
                   EvaluatedSignal r = eval_expr(c.rhs, trace);
                   for (std::size_t t = 0; t < n; ++t) out[t] = atom_value(l, c.op, r, t);
                 },
                 [&](const EnumEq& e) {
                   const Series& s = channel(trace, e.signal, SignalKind::enumeration);
                   auto it = std::find(s.variants.begin(), s.variants.end(), e.variant);
                   std::size_t target = static_cast<std::size_t>(it - s.variants.begin());
                   for (std::size_t t = 0; t < n; ++t) {
                     bool eq = s.indices[t] == target;
                     out[t] = (eq != e.negated) ? 1.0 : -1.0;
                   }
                 },
                 [&](const BoolIs& b) {
                   const Series& s = channel(trace, b.signal, SignalKind::boolean);
                   for (std::size_t t = 0; t < n; ++t) out[t] = ((s.flags[t] != 0) == b.expected) ? 1.0 : -1.0;
                 },
             },
             p);
  return out;
}

// Bounded until with lower bound 0: out[s] = max over s' in [s, min(s+w, n-1)]
// of min(rhs[s'], min lhs[s..s']).
inline std::vector<double> until_from_zero(const std::vector<double>& lhs, const std::vector<double>& rhs,
                                           std::size_t width) {
  const std::size_t n = lhs.size();
  std::vector<double> out(n);
  if (width >= n - 1) {
    // unbounded in effect: out[s] = max(min(rhs[s], lhs[s]), min(lhs[s], out[s+1]))
    out[n - 1] = std::min(rhs[n - 1], lhs[n - 1]);
    for (std::size_t s = n - 1; s-- > 0;)
      out[s] = std::max(std::min(rhs[s], lhs[s]), std::min(lhs[s], out[s + 1]));
    return out;
  }
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t last = std::min(s + width, n - 1);
    double prefix = lhs[s];
    double best = std::min(rhs[s], prefix);
    for (std::size_t k = s + 1; k <= last && prefix > best; ++k) {
      prefix = std::min(prefix, lhs[k]);
      best = std::max(best, std::min(rhs[k], prefix));
    }
    out[s] = best;
  }
  return out;
}

class Evaluator {
 public:
  Evaluator(const Trace& trace, RobustnessProfile* profile) : trace_(trace), profile_(profile) {}

  std::vector<double> eval(const Formula& f, const std::string& path) {
    std::vector<double> out = std::visit([&](const auto& node) { return eval_node(node, path); }, f.node());
    if (profile_) (*profile_)[path] = out;
    return out;
  }

 private:
  std::size_t n() const { return trace_.size(); }

  std::vector<double> eval_node(const Atom& a, const std::string&) { return atom_robustness(a.pred, trace_); }

  std::vector<double> eval_node(const Not& f, const std::string& path) {
    auto v = eval(*f.arg, child_path(path, 0));
    for (double& x : v) x = -x;
    return v;
  }

  template <class Combine>
  std::vector<double> binary(const Formula& l, const Formula& r, const std::string& path, Combine combine) {
    auto a = eval(l, child_path(path, 0));
    auto b = eval(r, child_path(path, 1));
    for (std::size_t t = 0; t < a.size(); ++t) a[t] = combine(a[t], b[t]);
    return a;
  }

  std::vector<double> eval_node(const And& f, const std::string& path) {
    return binary(*f.lhs, *f.rhs, path, [](double a, double b) { return std::min(a, b); });
  }
  std::vector<double> eval_node(const Or& f, const std::string& path) {
    return binary(*f.lhs, *f.rhs, path, [](double a, double b) { return std::max(a, b); });
  }
  std::vector<double> eval_node(const Implies& f, const std::string& path) {
    return binary(*f.lhs, *f.rhs, path, [](double a, double b) { return std::max(-a, b); });
  }

  std::vector<double> window(const std::vector<double>& child, const Interval& i, Extremum mode) {
    const std::size_t a = bound_to_offset(i.lo, trace_.dt(), n());
    const std::size_t b = bound_to_offset(i.hi, trace_.dt(), n());
    auto swept = windowed_extremum(child, b - a, mode);
    std::vector<double> out(n());
    for (std::size_t t = 0; t < n(); ++t) out[t] = swept[std::min(t + a, n() - 1)];
    return out;
  }

  std::vector<double> eval_node(const Globally& f, const std::string& path) {
    return window(eval(*f.arg, child_path(path, 0)), f.interval, Extremum::min);
  }
  std::vector<double> eval_node(const Eventually& f, const std::string& path) {
    return window(eval(*f.arg, child_path(path, 0)), f.interval, Extremum::max);
  }

  // rho[t] = min(min lhs[t .. t+a], until_from_zero(lhs, rhs, b-a)[t+a]); a window
  // starting past the end uses s = n-1.
  std::vector<double> eval_node(const Until& f, const std::string& path) {
    auto lhs = eval(*f.lhs, child_path(path, 0));
    auto rhs = eval(*f.rhs, child_path(path, 1));
    const std::size_t a = bound_to_offset(f.interval.lo, trace_.dt(), n());
    const std::size_t b = bound_to_offset(f.interval.hi, trace_.dt(), n());
    // a saturated upper bound reaches the trace end from every start
    auto tail = until_from_zero(lhs, rhs, b >= n() ? n() : b - a);
    auto prefix = windowed_extremum(lhs, a, Extremum::min);
    std::vector<double> out(n());
    for (std::size_t t = 0; t < n(); ++t) out[t] = std::min(prefix[t], tail[std::min(t + a, n() - 1)]);
    return out;
  }

  const Trace& trace_;
  RobustnessProfile* profile_;
};

class BooleanEvaluator {
 public:
  explicit BooleanEvaluator(const Trace& trace) : trace_(trace) {}

  std::vector<char> eval(const Formula& f) {
    return std::visit([&](const auto& node) { return eval_node(node); }, f.node());
  }

 private:
  std::size_t n() const { return trace_.size(); }

  std::vector<char> eval_node(const Atom& a) {
    std::vector<char> out(n());
    if (const auto* c = std::get_if<Compare>(&a.pred)) {
      EvaluatedSignal l = eval_expr(c->lhs, trace_);
      EvaluatedSignal r = eval_expr(c->rhs, trace_);
      for (std::size_t t = 0; t < n(); ++t) {
        switch (c->op) {
          case CompareOp::lt: out[t] = l[t] < r[t]; break;
          case CompareOp::le: out[t] = l[t] <= r[t]; break;
          case CompareOp::gt: out[t] = l[t] > r[t]; break;
          case CompareOp::ge: out[t] = l[t] >= r[t]; break;
        }
      }
      return out;
    }
    auto rho = atom_robustness(a.pred, trace_);
    for (std::size_t t = 0; t < n(); ++t) out[t] = rho[t] > 0;
    return out;
  }
  std::vector<char> eval_node(const Not& f) {
    auto v = eval(*f.arg);
    for (char& x : v) x = !x;
    return v;
  }
  std::vector<char> eval_node(const And& f) {
    auto a = eval(*f.lhs), b = eval(*f.rhs);
    for (std::size_t t = 0; t < n(); ++t) a[t] = a[t] && b[t];
    return a;
  }
  std::vector<char> eval_node(const Or& f) {
    auto a = eval(*f.lhs), b = eval(*f.rhs);
    for (std::size_t t = 0; t < n(); ++t) a[t] = a[t] || b[t];
    return a;
  }
  std::vector<char> eval_node(const Implies& f) {
    auto a = eval(*f.lhs), b = eval(*f.rhs);
    for (std::size_t t = 0; t < n(); ++t) a[t] = !a[t] || b[t];
    return a;
  }

  std::pair<std::size_t, std::size_t> span_of(std::size_t t, const Interval& i) const {
    const std::size_t a = bound_to_offset(i.lo, trace_.dt(), n());
    const std::size_t b = bound_to_offset(i.hi, trace_.dt(), n());
    if (t + a > n() - 1) return {n() - 1, n() - 1};
    return {t + a, std::min(t + b, n() - 1)};
  }

  std::vector<char> eval_node(const Globally& f) {
    auto c = eval(*f.arg);
    std::vector<char> out(n());
    for (std::size_t t = 0; t < n(); ++t) {
      auto [lo, hi] = span_of(t, f.interval);
      bool all = true;
      for (std::size_t k = lo; k <= hi && all; ++k) all = c[k];
      out[t] = all;
    }
    return out;
  }
  std::vector<char> eval_node(const Eventually& f) {
    auto c = eval(*f.arg);
    std::vector<char> out(n());
    for (std::size_t t = 0; t < n(); ++t) {
      auto [lo, hi] = span_of(t, f.interval);
      bool any = false;
      for (std::size_t k = lo; k <= hi && !any; ++k) any = c[k];
      out[t] = any;
    }
    return out;
  }
  std::vector<char> eval_node(const Until& f) {
    auto l = eval(*f.lhs), r = eval(*f.rhs);
    std::vector<char> out(n());
    for (std::size_t t = 0; t < n(); ++t) {
      auto [lo, hi] = span_of(t, f.interval);
      bool held = true;
      for (std::size_t k = t; k < lo; ++k) held = held && l[k];
      bool found = false;
      for (std::size_t k = lo; k <= hi && held && !found; ++k) {
        held = held && l[k];
        found = held && r[k];
      }
      out[t] = found;
    }
    return out;
  }

  const Trace& trace_;
};

inline EvalError with_rule(const EvalError& e, const std::string& rule) {
  if (rule.empty()) return e;
  return EvalError("rule '" + rule + "': " + e.what());
}

}  // namespace detail

/// Robustness at t = 0 plus its verdict.  Missing signals and off-grid
/// interval bounds raise EvalError naming the rule.
inline RobustnessResult robustness(const Formula& f, const Trace& trace, const std::string& rule_name = "") {
  try {
    detail::Evaluator ev(trace, nullptr);
    double rho = ev.eval(f, "root").front();
    return RobustnessResult{rule_name, rho, verdict_of(rho)};
  } catch (const EvalError& e) {
    throw detail::with_rule(e, rule_name);
  }
}

/// Every node's full robustness series, keyed by node path.
inline RobustnessProfile robustness_profile(const Formula& f, const Trace& trace, const std::string& rule_name = "") {
  try {
    RobustnessProfile profile;
    detail::Evaluator ev(trace, &profile);
    ev.eval(f, "root");
    return profile;
  } catch (const EvalError& e) {
    throw detail::with_rule(e, rule_name);
  }
}

/// Classical boolean semantics at t = 0 under the same window clipping.
inline bool boolean_monitor(const Formula& f, const Trace& trace, const std::string& rule_name = "") {
  try {
    return detail::BooleanEvaluator(trace).eval(f).front() != 0;
  } catch (const EvalError& e) {
    throw detail::with_rule(e, rule_name);
  }
}

}  // namespace stlmon
