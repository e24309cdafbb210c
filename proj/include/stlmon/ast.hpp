#pragma once

// Formula representation for the STL rule language: signal declarations,
// signal expressions, atomic predicates and temporal formulas.  All nodes are
// immutable once built; children are shared, so copies are cheap and a
// Formula may be evaluated from many threads at once.

#include <algorithm>
#include <concepts>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

namespace stlmon {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_real(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// Like format_real, but never uses exponent notation (the rule grammar has
/// decimal literals only).
inline std::string format_decimal(double value) {
  if (!std::isfinite(value)) return format_real(value);
  if (value == 0.0) value = 0.0;
  char buf[400];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Declarations

enum class SignalKind { real, boolean, enumeration };

inline const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::real: return "real";
    case SignalKind::boolean: return "bool";
    case SignalKind::enumeration: return "enum";
  }
  return "?";
}

struct SignalDecl {
  std::string name;
  SignalKind kind = SignalKind::real;
  std::vector<std::string> variants;  // enumeration only, declaration order

  std::ptrdiff_t variant_index(const std::string& v) const {
    auto it = std::find(variants.begin(), variants.end(), v);
    return it == variants.end() ? -1 : it - variants.begin();
  }

  friend bool operator==(const SignalDecl&, const SignalDecl&) = default;
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Time window [lo, hi] in the trace's time unit; hi may be kUnbounded.
struct Interval {
  double lo = 0.0;
  double hi = kUnbounded;

  bool bounded() const { return std::isfinite(hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// ---------------------------------------------------------------------------
// Signal expressions

class SignalExpr;
using ExprPtr = std::shared_ptr<const SignalExpr>;

struct SignalRef {
  std::string name;
};
struct Constant {
  double value = 0.0;
};
struct Abs {
  ExprPtr arg;
};
/// Backward-difference time derivative of a real signal.
struct Deriv {
  std::string name;
};

enum class ArithOp { add, sub, mul, div };

struct Arith {
  ArithOp op = ArithOp::add;
  ExprPtr lhs;
  ExprPtr rhs;
};

class SignalExpr {
 public:
  using Node = std::variant<SignalRef, Constant, Abs, Deriv, Arith>;

  template <class T>
    requires std::constructible_from<Node, T&&>
  SignalExpr(T&& node) : node_(std::forward<T>(node)) {}  // NOLINT: implicit by intent

  const Node& node() const { return node_; }

 private:
  Node node_;
};

inline bool operator==(const SignalExpr& a, const SignalExpr& b);

inline bool operator==(const SignalRef& a, const SignalRef& b) { return a.name == b.name; }
inline bool operator==(const Constant& a, const Constant& b) { return a.value == b.value; }
inline bool operator==(const Abs& a, const Abs& b) { return *a.arg == *b.arg; }
inline bool operator==(const Deriv& a, const Deriv& b) { return a.name == b.name; }
inline bool operator==(const Arith& a, const Arith& b) {
  return a.op == b.op && *a.lhs == *b.lhs && *a.rhs == *b.rhs;
}
inline bool operator==(const SignalExpr& a, const SignalExpr& b) { return a.node() == b.node(); }

namespace expr {
inline SignalExpr ref(std::string name) { return SignalRef{std::move(name)}; }
inline SignalExpr constant(double v) { return Constant{v}; }
inline SignalExpr deriv(std::string name) { return Deriv{std::move(name)}; }
inline SignalExpr abs(SignalExpr e) { return Abs{std::make_shared<const SignalExpr>(std::move(e))}; }
inline SignalExpr arith(ArithOp op, SignalExpr l, SignalExpr r) {
  return Arith{op, std::make_shared<const SignalExpr>(std::move(l)),
               std::make_shared<const SignalExpr>(std::move(r))};
}
}  // namespace expr

// ---------------------------------------------------------------------------
// Predicates

enum class CompareOp { lt, le, gt, ge };

inline const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

struct Compare {
  SignalExpr lhs;
  CompareOp op;
  SignalExpr rhs;

  friend bool operator==(const Compare&, const Compare&) = default;
};

struct EnumEq {
  std::string signal;
  std::string variant;
  bool negated = false;

  friend bool operator==(const EnumEq&, const EnumEq&) = default;
};

struct BoolIs {
  std::string signal;
  bool expected = true;

  friend bool operator==(const BoolIs&, const BoolIs&) = default;
};

using Predicate = std::variant<Compare, EnumEq, BoolIs>;

// ---------------------------------------------------------------------------
// Formulas

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Atom {
  Predicate pred;
};
struct Not {
  FormulaPtr arg;
};
struct And {
  FormulaPtr lhs, rhs;
};
struct Or {
  FormulaPtr lhs, rhs;
};
struct Implies {
  FormulaPtr lhs, rhs;
};
struct Globally {
  Interval interval;
  FormulaPtr arg;
};
struct Eventually {
  Interval interval;
  FormulaPtr arg;
};
struct Until {
  Interval interval;
  FormulaPtr lhs, rhs;
};

class Formula {
 public:
  using Node = std::variant<Atom, Not, And, Or, Implies, Globally, Eventually, Until>;

  template <class T>
    requires std::constructible_from<Node, T&&>
  Formula(T&& node) : node_(std::forward<T>(node)) {}  // NOLINT: implicit by intent

  const Node& node() const { return node_; }

  /// Direct subformulas, left to right.
  std::vector<const Formula*> children() const {
    return std::visit(
        overloaded{
            [](const Atom&) { return std::vector<const Formula*>{}; },
            [](const Not& n) { return std::vector<const Formula*>{n.arg.get()}; },
            [](const Globally& n) { return std::vector<const Formula*>{n.arg.get()}; },
            [](const Eventually& n) { return std::vector<const Formula*>{n.arg.get()}; },
            [](const Until& n) { return std::vector<const Formula*>{n.lhs.get(), n.rhs.get()}; },
            [](const auto& n) { return std::vector<const Formula*>{n.lhs.get(), n.rhs.get()}; },
        },
        node_);
  }

  std::size_t node_count() const {
    std::size_t total = 1;
    for (const Formula* c : children()) total += c->node_count();
    return total;
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const Formula* c : children()) d = std::max(d, c->depth());
    return d + 1;
  }

 private:
  Node node_;
};

inline bool operator==(const Formula& a, const Formula& b);

inline bool operator==(const Atom& a, const Atom& b) { return a.pred == b.pred; }
inline bool operator==(const Not& a, const Not& b) { return *a.arg == *b.arg; }
inline bool operator==(const And& a, const And& b) { return *a.lhs == *b.lhs && *a.rhs == *b.rhs; }
inline bool operator==(const Or& a, const Or& b) { return *a.lhs == *b.lhs && *a.rhs == *b.rhs; }
inline bool operator==(const Implies& a, const Implies& b) {
  return *a.lhs == *b.lhs && *a.rhs == *b.rhs;
}
inline bool operator==(const Globally& a, const Globally& b) {
  return a.interval == b.interval && *a.arg == *b.arg;
}
inline bool operator==(const Eventually& a, const Eventually& b) {
  return a.interval == b.interval && *a.arg == *b.arg;
}
inline bool operator==(const Until& a, const Until& b) {
  return a.interval == b.interval && *a.lhs == *b.lhs && *a.rhs == *b.rhs;
}
inline bool operator==(const Formula& a, const Formula& b) { return a.node() == b.node(); }

namespace formula {
namespace detail {
inline FormulaPtr box(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
}  // namespace detail

inline Formula atom(Predicate p) { return Atom{std::move(p)}; }
inline Formula compare(SignalExpr l, CompareOp op, SignalExpr r) {
  return Atom{Compare{std::move(l), op, std::move(r)}};
}
inline Formula enum_eq(std::string s, std::string v, bool negated = false) {
  return Atom{EnumEq{std::move(s), std::move(v), negated}};
}
inline Formula bool_is(std::string s, bool expected = true) {
  return Atom{BoolIs{std::move(s), expected}};
}
inline Formula negation(Formula f) { return Not{detail::box(std::move(f))}; }
inline Formula conj(Formula l, Formula r) { return And{detail::box(std::move(l)), detail::box(std::move(r))}; }
inline Formula disj(Formula l, Formula r) { return Or{detail::box(std::move(l)), detail::box(std::move(r))}; }
inline Formula implies(Formula l, Formula r) {
  return Implies{detail::box(std::move(l)), detail::box(std::move(r))};
}
inline Formula globally(Interval i, Formula f) { return Globally{i, detail::box(std::move(f))}; }
inline Formula eventually(Interval i, Formula f) { return Eventually{i, detail::box(std::move(f))}; }
inline Formula until(Interval i, Formula l, Formula r) {
  return Until{i, detail::box(std::move(l)), detail::box(std::move(r))};
}
}  // namespace formula

// ---------------------------------------------------------------------------
// Specification

struct Rule {
  std::string name;
  Formula formula;
};

struct Specification {
  std::vector<SignalDecl> declarations;
  std::vector<Rule> rules;

  const SignalDecl* find_signal(const std::string& name) const {
    for (const auto& d : declarations)
      if (d.name == name) return &d;
    return nullptr;
  }

  const Rule* find_rule(const std::string& name) const {
    for (const auto& r : rules)
      if (r.name == name) return &r;
    return nullptr;
  }
};

/// Child i of the node at `path` lives at `path + "." + i`; the root is "root".
inline std::string child_path(const std::string& path, std::size_t i) {
  return path + "." + std::to_string(i);
}

struct Diagnostic {
  std::string rule;  // empty for declaration-level problems
  std::string path;
  std::string message;

  std::string to_string() const {
    if (rule.empty()) return message;
    return "rule '" + rule + "' at " + path + ": " + message;
  }

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

namespace detail {

inline bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), [&](char c) { return alpha(c) || digit(c); });
}

class Validator {
 public:
  Validator(const Specification& spec, std::vector<Diagnostic>& out) : spec_(spec), out_(out) {}

  void rule(const Rule& r) {
    rule_ = r.name;
    formula(r.formula, "root");
  }

 private:
  void report(const std::string& path, std::string msg) { out_.push_back({rule_, path, std::move(msg)}); }

  void interval(const Interval& i, const std::string& path) {
    if (std::isnan(i.lo) || std::isnan(i.hi)) {
      report(path, "interval bound is not a number");
      return;
    }
    if (!std::isfinite(i.lo)) report(path, "interval lower bound must be finite");
    if (i.lo < 0) report(path, "interval lo < 0");
    if (i.hi < i.lo) report(path, "interval hi < lo");
  }

  // Returns true when the expression is real-valued (and every name resolves).
  bool expression(const SignalExpr& e, const std::string& path) {
    return std::visit(
        overloaded{
            [&](const SignalRef& n) { return real_signal(n.name, path); },
            [&](const Constant& n) {
              if (!std::isfinite(n.value)) report(path, "constant is not finite");
              return true;
            },
            [&](const Abs& n) { return expression(*n.arg, path); },
            [&](const Deriv& n) { return real_signal(n.name, path); },
            [&](const Arith& n) {
              bool l = expression(*n.lhs, path);
              bool r = expression(*n.rhs, path);
              return l && r;
            },
        },
        e.node());
  }

  bool real_signal(const std::string& name, const std::string& path) {
    const SignalDecl* d = spec_.find_signal(name);
    if (!d) {
      report(path, "unknown signal '" + name + "'");
      return false;
    }
    if (d->kind != SignalKind::real) {
      report(path, "signal '" + name + "' is " + to_string(d->kind) + ", expected real");
      return false;
    }
    return true;
  }

  void predicate(const Predicate& p, const std::string& path) {
    std::visit(overloaded{
                   [&](const Compare& c) {
                     expression(c.lhs, path);
                     expression(c.rhs, path);
                   },
                   [&](const EnumEq& e) {
                     const SignalDecl* d = spec_.find_signal(e.signal);
                     if (!d) {
                       report(path, "unknown signal '" + e.signal + "'");
                     } else if (d->kind != SignalKind::enumeration) {
                       report(path, "signal '" + e.signal + "' is " + to_string(d->kind) + ", expected enum");
                     } else if (d->variant_index(e.variant) < 0) {
                       report(path, "undeclared variant '" + e.variant + "' of signal '" + e.signal + "'");
                     }
                   },
                   [&](const BoolIs& b) {
                     const SignalDecl* d = spec_.find_signal(b.signal);
                     if (!d) {
                       report(path, "unknown signal '" + b.signal + "'");
                     } else if (d->kind != SignalKind::boolean) {
                       report(path, "signal '" + b.signal + "' is " + to_string(d->kind) + ", expected bool");
                     }
                   },
               },
               p);
  }

  void formula(const Formula& f, const std::string& path) {
    std::visit(overloaded{
                   [&](const Atom& a) { predicate(a.pred, path); },
                   [&](const Globally& g) { interval(g.interval, path); },
                   [&](const Eventually& e) { interval(e.interval, path); },
                   [&](const Until& u) { interval(u.interval, path); },
                   [](const auto&) {},
               },
               f.node());
    auto kids = f.children();
    for (std::size_t i = 0; i < kids.size(); ++i) formula(*kids[i], child_path(path, i));
  }

  const Specification& spec_;
  std::vector<Diagnostic>& out_;
  std::string rule_;
};

}  // namespace detail

/// Structural checks of a specification.  Returns one diagnostic per
/// violation, in declaration order then rule order, depth-first per rule.
inline std::vector<Diagnostic> validate(const Specification& spec) {
  std::vector<Diagnostic> out;
  std::set<std::string> seen;
  for (const auto& d : spec.declarations) {
    if (!detail::is_identifier(d.name)) out.push_back({"", "", "invalid signal name '" + d.name + "'"});
    if (!seen.insert(d.name).second) out.push_back({"", "", "duplicate signal '" + d.name + "'"});
    if (d.kind == SignalKind::enumeration) {
      if (d.variants.empty()) out.push_back({"", "", "enum signal '" + d.name + "' has no variants"});
      std::set<std::string> vs;
      for (const auto& v : d.variants)
        if (!vs.insert(v).second)
          out.push_back({"", "", "duplicate variant '" + v + "' in signal '" + d.name + "'"});
    } else if (!d.variants.empty()) {
      out.push_back({"", "", "signal '" + d.name + "' is not an enum but lists variants"});
    }
  }
  std::set<std::string> rule_names;
  for (const auto& r : spec.rules) {
    if (!rule_names.insert(r.name).second) out.push_back({r.name, "root", "duplicate rule name"});
    detail::Validator(spec, out).rule(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Printing

inline std::string pretty_print(const SignalExpr& e);

namespace detail {

inline std::string expr_operand(const SignalExpr& e) {
  if (std::holds_alternative<Arith>(e.node())) return "(" + pretty_print(e) + ")";
  return pretty_print(e);
}

inline const char* arith_symbol(ArithOp op) {
  switch (op) {
    case ArithOp::add: return "+";
    case ArithOp::sub: return "-";
    case ArithOp::mul: return "*";
    case ArithOp::div: return "/";
  }
  return "?";
}

inline std::string interval_text(const Interval& i) {
  return "[" + format_decimal(i.lo) + ", " + format_decimal(i.hi) + "]";
}

}  // namespace detail

inline std::string pretty_print(const SignalExpr& e) {
  return std::visit(overloaded{
                        [](const SignalRef& n) { return n.name; },
                        [](const Constant& n) { return format_decimal(n.value); },
                        [](const Abs& n) { return "abs(" + pretty_print(*n.arg) + ")"; },
                        [](const Deriv& n) { return "deriv(" + n.name + ")"; },
                        [](const Arith& n) {
                          return detail::expr_operand(*n.lhs) + " " + detail::arith_symbol(n.op) + " " +
                                 detail::expr_operand(*n.rhs);
                        },
                    },
                    e.node());
}

inline std::string pretty_print(const Predicate& p) {
  return std::visit(overloaded{
                        [](const Compare& c) {
                          return pretty_print(c.lhs) + " " + to_string(c.op) + " " + pretty_print(c.rhs);
                        },
                        [](const EnumEq& e) { return e.signal + (e.negated ? " != " : " == ") + e.variant; },
                        [](const BoolIs& b) { return b.expected ? b.signal : b.signal + " == false"; },
                    },
                    p);
}

inline std::string pretty_print(const Formula& f);

namespace detail {

// Binary nodes and atoms are parenthesized as operands; prefix operators bind
// tighter than every binary operator and never need them.
inline std::string operand(const Formula& f) {
  const auto& n = f.node();
  if (std::holds_alternative<Not>(n) || std::holds_alternative<Globally>(n) ||
      std::holds_alternative<Eventually>(n))
    return pretty_print(f);
  return "(" + pretty_print(f) + ")";
}

}  // namespace detail

/// Canonical concrete syntax; parses back to an identical tree.
inline std::string pretty_print(const Formula& f) {
  using detail::operand;
  return std::visit(
      overloaded{
          [](const Atom& a) { return pretty_print(a.pred); },
          [](const Not& n) { return "!" + operand(*n.arg); },
          [](const And& n) { return operand(*n.lhs) + " && " + operand(*n.rhs); },
          [](const Or& n) { return operand(*n.lhs) + " || " + operand(*n.rhs); },
          [](const Implies& n) { return operand(*n.lhs) + " -> " + operand(*n.rhs); },
          [](const Globally& n) { return "G" + detail::interval_text(n.interval) + " " + operand(*n.arg); },
          [](const Eventually& n) { return "F" + detail::interval_text(n.interval) + " " + operand(*n.arg); },
          [](const Until& n) {
            return operand(*n.lhs) + " U" + detail::interval_text(n.interval) + " " + operand(*n.rhs);
          },
      },
      f.node());
}

/// Full `.stl` source for a specification.
inline std::string pretty_print(const Specification& spec) {
  std::string out;
  for (const auto& d : spec.declarations) {
    out += "signal " + d.name + " : " + to_string(d.kind);
    if (d.kind == SignalKind::enumeration) {
      out += " {";
      for (std::size_t i = 0; i < d.variants.size(); ++i) out += (i ? ", " : "") + d.variants[i];
      out += "}";
    }
    out += "\n";
  }
  if (!spec.declarations.empty() && !spec.rules.empty()) out += "\n";
  for (const auto& r : spec.rules) out += "rule " + r.name + " : " + pretty_print(r.formula) + "\n";
  return out;
}

}  // namespace stlmon
