#pragma once

// Rollout traces: uniformly sampled, named real/bool/enum channels, plus the
// CSV and JSON codecs and pointwise evaluation of signal expressions.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stlmon/ast.hpp"

namespace stlmon {

class TraceError : public std::runtime_error {
 public:
  enum class Code {
    missing_time_column,
    unknown_column,
    duplicate_column,
    malformed_row,
    bad_value,
    undeclared_variant,
    too_few_rows,
    non_increasing_time,
    non_uniform_sampling,
    ragged_signals,
    nonpositive_dt,
    malformed_document,
  };

  /// `row` and `column` are 1-based positions in the source (0 when not applicable).
  TraceError(Code code, const std::string& message, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(format(message, row, column)), code_(code), row_(row), column_(column) {}

  Code code() const { return code_; }
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& msg, std::size_t row, std::size_t col) {
    if (row == 0 && col == 0) return msg;
    std::string out = msg + " (";
    if (row) out += "row " + std::to_string(row);
    if (row && col) out += ", ";
    if (col) out += "column " + std::to_string(col);
    return out + ")";
  }

  Code code_;
  std::size_t row_;
  std::size_t column_;
};

/// One channel of a trace.  Exactly one of the value vectors is populated,
/// selected by `kind`.
struct Series {
  SignalKind kind = SignalKind::real;
  std::vector<double> reals;
  std::vector<std::uint8_t> flags;
  std::vector<std::size_t> indices;   // into `variants`
  std::vector<std::string> variants;  // enumeration only

  static Series real(std::vector<double> v) {
    Series s;
    s.kind = SignalKind::real;
    s.reals = std::move(v);
    return s;
  }
  static Series boolean(std::vector<std::uint8_t> v) {
    Series s;
    s.kind = SignalKind::boolean;
    s.flags = std::move(v);
    return s;
  }
  static Series enumeration(std::vector<std::size_t> v, std::vector<std::string> variants) {
    Series s;
    s.kind = SignalKind::enumeration;
    s.indices = std::move(v);
    s.variants = std::move(variants);
    return s;
  }

  std::size_t size() const {
    switch (kind) {
      case SignalKind::real: return reals.size();
      case SignalKind::boolean: return flags.size();
      case SignalKind::enumeration: return indices.size();
    }
    return 0;
  }
};

struct Channel {
  std::string name;
  Series series;
};

class Trace {
 public:
  /// Validates and builds a trace: at least two samples, strictly increasing
  /// uniform times, finite values and one value per timestamp in every channel.
  Trace(std::string id, std::vector<double> times, std::vector<Channel> channels)
      : id_(std::move(id)), times_(std::move(times)), channels_(std::move(channels)) {
    if (times_.size() < 2)
      throw TraceError(TraceError::Code::too_few_rows, "trace needs at least 2 samples, got " +
                                                           std::to_string(times_.size()));
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (!std::isfinite(times_[i]))
        throw TraceError(TraceError::Code::bad_value, "non-finite timestamp at sample " + std::to_string(i));
    dt_ = times_[1] - times_[0];
    if (!(dt_ > 0))
      throw TraceError(TraceError::Code::non_increasing_time, "times must be strictly increasing at sample 1");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      double gap = times_[i] - times_[i - 1];
      if (!(gap > 0))
        throw TraceError(TraceError::Code::non_increasing_time,
                         "times must be strictly increasing at sample " + std::to_string(i));
      if (std::abs(gap - dt_) > kSamplingTolerance * dt_)
        throw TraceError(TraceError::Code::non_uniform_sampling,
                         "non-uniform sampling: gap " + format_real(gap) + " before sample " + std::to_string(i) +
                             " differs from dt " + format_real(dt_));
    }
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      const Channel& ch = channels_[c];
      for (std::size_t k = 0; k < c; ++k)
        if (channels_[k].name == ch.name)
          throw TraceError(TraceError::Code::duplicate_column, "duplicate channel '" + ch.name + "'");
      if (ch.series.size() != times_.size())
        throw TraceError(TraceError::Code::ragged_signals,
                         "ragged signals: channel '" + ch.name + "' has " + std::to_string(ch.series.size()) +
                             " values for " + std::to_string(times_.size()) + " timestamps");
      if (ch.series.kind == SignalKind::real) {
        for (std::size_t i = 0; i < ch.series.reals.size(); ++i)
          if (!std::isfinite(ch.series.reals[i]))
            throw TraceError(TraceError::Code::bad_value,
                             "non-finite value in channel '" + ch.name + "' at sample " + std::to_string(i));
      } else if (ch.series.kind == SignalKind::enumeration) {
        for (std::size_t i = 0; i < ch.series.indices.size(); ++i)
          if (ch.series.indices[i] >= ch.series.variants.size())
            throw TraceError(TraceError::Code::undeclared_variant,
                             "variant index out of range in channel '" + ch.name + "' at sample " +
                                 std::to_string(i));
      }
    }
  }

  /// Relative tolerance on the deviation of each gap from dt.
  static constexpr double kSamplingTolerance = 1e-6;

  const std::string& id() const { return id_; }
  double dt() const { return dt_; }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Channel>& channels() const { return channels_; }

  const Series* find(const std::string& name) const {
    for (const auto& ch : channels_)
      if (ch.name == name) return &ch.series;
    return nullptr;
  }

 private:
  std::string id_;
  std::vector<double> times_;
  std::vector<Channel> channels_;
  double dt_ = 0.0;
};

// ---------------------------------------------------------------------------
// Codecs

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  return lines;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_bool(std::string_view s, std::uint8_t& out) {
  if (s == "true" || s == "1") {
    out = 1;
    return true;
  }
  if (s == "false" || s == "0") {
    out = 0;
    return true;
  }
  return false;
}

}  // namespace detail

/// Reads a CSV trace.  The first header cell must be `time`; every other
/// header must name a declared signal.  Row numbers in errors count the
/// header as row 1.
inline Trace load_trace_csv(std::string_view text, const Specification& spec, std::string id = "") {
  using Code = TraceError::Code;
  auto lines = detail::split_lines(text);
  // blank trailing lines are tolerated
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw TraceError(Code::missing_time_column, "empty trace file");

  auto header = detail::split_cells(lines[0]);
  if (header[0] != "time") throw TraceError(Code::missing_time_column, "first column must be 'time'", 1, 1);

  std::vector<const SignalDecl*> decls;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const SignalDecl* d = spec.find_signal(std::string(header[c]));
    if (!d) throw TraceError(Code::unknown_column, "unknown column '" + std::string(header[c]) + "'", 1, c + 1);
    for (std::size_t k = 0; k + 1 < c; ++k)
      if (decls[k] == d)
        throw TraceError(Code::duplicate_column, "duplicate column '" + std::string(header[c]) + "'", 1, c + 1);
    decls.push_back(d);
  }

  std::vector<double> times;
  std::vector<Channel> channels;
  for (const SignalDecl* d : decls) channels.push_back(Channel{d->name, Series{}});
  for (std::size_t c = 0; c < decls.size(); ++c) {
    channels[c].series.kind = decls[c]->kind;
    channels[c].series.variants = decls[c]->variants;
  }

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    auto cells = detail::split_cells(lines[r]);
    if (cells.size() != header.size())
      throw TraceError(Code::malformed_row,
                       "malformed row: expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       row);
    double t;
    if (!detail::parse_real(cells[0], t))
      throw TraceError(Code::bad_value, "bad time value '" + std::string(cells[0]) + "'", row, 1);
    times.push_back(t);
    for (std::size_t c = 0; c < decls.size(); ++c) {
      std::string_view cell = cells[c + 1];
      Series& s = channels[c].series;
      switch (s.kind) {
        case SignalKind::real: {
          double v;
          if (!detail::parse_real(cell, v))
            throw TraceError(Code::bad_value, "bad real value '" + std::string(cell) + "'", row, c + 2);
          s.reals.push_back(v);
          break;
        }
        case SignalKind::boolean: {
          std::uint8_t v;
          if (!detail::parse_bool(cell, v))
            throw TraceError(Code::bad_value, "bad bool value '" + std::string(cell) + "'", row, c + 2);
          s.flags.push_back(v);
          break;
        }
        case SignalKind::enumeration: {
          auto idx = decls[c]->variant_index(std::string(cell));
          if (idx < 0)
            throw TraceError(Code::undeclared_variant,
                             "undeclared variant '" + std::string(cell) + "' for signal '" + decls[c]->name + "'",
                             row, c + 2);
          s.indices.push_back(static_cast<std::size_t>(idx));
          break;
        }
      }
    }
  }
  if (times.size() < 2)
    throw TraceError(Code::too_few_rows, "trace needs at least 2 samples, got " + std::to_string(times.size()));
  for (std::size_t i = 1; i < times.size(); ++i) {
    double dt = times[1] - times[0];
    double gap = times[i] - times[i - 1];
    if (!(gap > 0))
      throw TraceError(Code::non_increasing_time, "times must be strictly increasing", i + 2, 1);
    if (std::abs(gap - dt) > Trace::kSamplingTolerance * dt)
      throw TraceError(Code::non_uniform_sampling,
                       "non-uniform sampling: gap " + format_real(gap) + " differs from dt " + format_real(dt), i + 2,
                       1);
  }
  return Trace(std::move(id), std::move(times), std::move(channels));
}

/// Reads a JSON trace: {"id": ..., "dt": ..., "signals": {name: [...]}}.
/// Timestamps are i * dt.  Bool samples may be true/false or 0/1; enum
/// samples are variant names.
inline Trace load_trace_json(std::string_view text, const Specification& spec) {
  using Code = TraceError::Code;
  using nlohmann::json;
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw TraceError(Code::malformed_document, "trace is not a JSON object");

  std::string id;
  if (doc.contains("id")) {
    if (!doc["id"].is_string()) throw TraceError(Code::malformed_document, "'id' must be a string");
    id = doc["id"].get<std::string>();
  }
  if (!doc.contains("dt") || !doc["dt"].is_number())
    throw TraceError(Code::malformed_document, "'dt' must be a number");
  double dt = doc["dt"].get<double>();
  if (!(dt > 0) || !std::isfinite(dt)) throw TraceError(Code::nonpositive_dt, "nonpositive dt");
  if (!doc.contains("signals") || !doc["signals"].is_object())
    throw TraceError(Code::malformed_document, "'signals' must be an object");

  std::vector<Channel> channels;
  std::size_t length = 0;
  bool first = true;
  for (const auto& [name, arr] : doc["signals"].items()) {
    const SignalDecl* d = spec.find_signal(name);
    if (!d) throw TraceError(Code::unknown_column, "unknown signal '" + name + "'");
    if (!arr.is_array()) throw TraceError(Code::malformed_document, "signal '" + name + "' must be an array");
    if (first) {
      length = arr.size();
      first = false;
    } else if (arr.size() != length) {
      throw TraceError(Code::ragged_signals, "ragged signals: '" + name + "' has " + std::to_string(arr.size()) +
                                                 " samples, expected " + std::to_string(length));
    }
    Series s;
    s.kind = d->kind;
    s.variants = d->variants;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& v = arr[i];
      auto bad = [&](const char* what) {
        return TraceError(Code::bad_value, std::string("bad ") + what + " value in signal '" + name + "'", i + 1);
      };
      switch (d->kind) {
        case SignalKind::real:
          if (!v.is_number()) throw bad("real");
          s.reals.push_back(v.get<double>());
          if (!std::isfinite(s.reals.back())) throw bad("real");
          break;
        case SignalKind::boolean:
          if (v.is_boolean()) {
            s.flags.push_back(v.get<bool>() ? 1 : 0);
          } else if (v.is_number_integer() && (v.get<long long>() == 0 || v.get<long long>() == 1)) {
            s.flags.push_back(static_cast<std::uint8_t>(v.get<long long>()));
          } else {
            throw bad("bool");
          }
          break;
        case SignalKind::enumeration: {
          if (!v.is_string()) throw bad("enum");
          auto idx = d->variant_index(v.get<std::string>());
          if (idx < 0)
            throw TraceError(Code::undeclared_variant,
                             "undeclared variant '" + v.get<std::string>() + "' for signal '" + name + "'", i + 1);
          s.indices.push_back(static_cast<std::size_t>(idx));
          break;
        }
      }
    }
    channels.push_back(Channel{name, std::move(s)});
  }
  if (length < 2)
    throw TraceError(Code::too_few_rows, "trace needs at least 2 samples, got " + std::to_string(length));
  std::vector<double> times(length);
  for (std::size_t i = 0; i < length; ++i) times[i] = static_cast<double>(i) * dt;
  return Trace(std::move(id), std::move(times), std::move(channels));
}

namespace detail {

inline std::string cell_text(const Series& s, std::size_t i) {
  switch (s.kind) {
    case SignalKind::real: return format_real(s.reals[i]);
    case SignalKind::boolean: return s.flags[i] ? "true" : "false";
    case SignalKind::enumeration: return s.variants[s.indices[i]];
  }
  return "";
}

}  // namespace detail

/// CSV with shortest round-trip decimals, channels in trace order, LF endings.
inline std::string write_trace_csv(const Trace& trace) {
  std::string out = "time";
  for (const auto& ch : trace.channels()) out += "," + ch.name;
  out += "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += format_real(trace.times()[i]);
    for (const auto& ch : trace.channels()) out += "," + detail::cell_text(ch.series, i);
    out += "\n";
  }
  return out;
}

inline std::string write_trace_json(const Trace& trace) {
  nlohmann::ordered_json doc;
  doc["id"] = trace.id();
  doc["dt"] = trace.dt();
  nlohmann::ordered_json signals = nlohmann::ordered_json::object();
  for (const auto& ch : trace.channels()) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < trace.size(); ++i) {
      switch (ch.series.kind) {
        case SignalKind::real: arr.push_back(ch.series.reals[i]); break;
        case SignalKind::boolean: arr.push_back(static_cast<bool>(ch.series.flags[i])); break;
        case SignalKind::enumeration: arr.push_back(ch.series.variants[ch.series.indices[i]]); break;
      }
    }
    signals[ch.name] = std::move(arr);
  }
  doc["signals"] = std::move(signals);
  return doc.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Expression evaluation

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Engine-facing view of a signal expression: one finite real per sample.
using EvaluatedSignal = std::vector<double>;

namespace detail {

inline const std::vector<double>& real_channel(const Trace& trace, const std::string& name) {
  const Series* s = trace.find(name);
  if (!s) throw EvalError("signal '" + name + "' is missing from trace '" + trace.id() + "'");
  if (s->kind != SignalKind::real) throw EvalError("signal '" + name + "' is not real-valued");
  return s->reals;
}

}  // namespace detail

/// Pointwise evaluation.  deriv(s)[i] = (s[i] - s[i-1]) / dt for i >= 1 and 0 at i = 0.
inline EvaluatedSignal eval_expr(const SignalExpr& e, const Trace& trace) {
  const std::size_t n = trace.size();
  EvaluatedSignal out = std::visit(
      overloaded{
          [&](const SignalRef& r) { return detail::real_channel(trace, r.name); },
          [&](const Constant& c) { return EvaluatedSignal(n, c.value); },
          [&](const Abs& a) {
            EvaluatedSignal v = eval_expr(*a.arg, trace);
            for (double& x : v) x = std::abs(x);
            return v;
          },
          [&](const Deriv& d) {
            const auto& s = detail::real_channel(trace, d.name);
            EvaluatedSignal v(n, 0.0);
            for (std::size_t i = 1; i < n; ++i) v[i] = (s[i] - s[i - 1]) / trace.dt();
            return v;
          },
          [&](const Arith& a) {
            EvaluatedSignal l = eval_expr(*a.lhs, trace);
            EvaluatedSignal r = eval_expr(*a.rhs, trace);
            for (std::size_t i = 0; i < n; ++i) {
              switch (a.op) {
                case ArithOp::add: l[i] = l[i] + r[i]; break;
                case ArithOp::sub: l[i] = l[i] - r[i]; break;
                case ArithOp::mul: l[i] = l[i] * r[i]; break;
                case ArithOp::div:
                  if (r[i] == 0.0) throw EvalError("division by zero at sample " + std::to_string(i));
                  l[i] = l[i] / r[i];
                  break;
              }
            }
            return l;
          },
      },
      e.node());
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(out[i])) throw EvalError("non-finite expression value at sample " + std::to_string(i));
  return out;
}

}  // namespace stlmon
