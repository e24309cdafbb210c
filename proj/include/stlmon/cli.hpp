#pragma once

// Command-line front end: check, report, compare, simulate.
//
// Exit codes: 0 every verdict satisfied (or the command succeeded),
// 1 at least one violation (check only), 2 usage, parse or load error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stlmon/metrics.hpp"
#include "stlmon/parallel.hpp"
#include "stlmon/parser.hpp"
#include "stlmon/robustness.hpp"
#include "stlmon/sim.hpp"
#include "stlmon/trace.hpp"

namespace stlmon::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum ExitCode : int { kCompliant = 0, kViolations = 1, kError = 2 };

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { json, table };

struct RunManifest {
  std::string spec_path;
  std::vector<std::string> trace_paths;
  std::vector<std::string> trace_dirs;
  std::string output_path;  // empty: standard output
  Format format = Format::table;
  double alpha = 0.05;

  void validate() const {
    if (spec_path.empty()) throw CliError("specification path is empty");
    if (trace_paths.empty() && trace_dirs.empty()) throw CliError("no trace paths given");
    for (const auto& p : trace_paths)
      if (p.empty()) throw CliError("empty trace path");
    for (const auto& p : trace_dirs)
      if (p.empty()) throw CliError("empty trace directory");
    if (!(alpha > 0 && alpha < 1)) throw CliError("alpha must lie in (0, 1)");
  }
};

// ---------------------------------------------------------------------------
// I/O helpers

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw CliError("cannot read '" + path.string() + "'");
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw CliError("cannot write '" + path.string() + "'");
}

inline Specification load_spec(const std::string& path) {
  std::string text = read_file(path);
  try {
    return parse_spec(text);
  } catch (const ParseError& e) {
    throw CliError(path + ":" + e.what());
  }
}

inline Trace load_trace_file(const fs::path& path, const Specification& spec) {
  std::string text = read_file(path);
  try {
    if (path.extension() == ".json") {
      Trace t = load_trace_json(text, spec);
      if (!t.id().empty()) return t;
      return Trace(path.stem().string(), t.times(), t.channels());
    }
    return load_trace_csv(text, spec, path.stem().string());
  } catch (const TraceError& e) {
    throw CliError(path.string() + ": " + e.what());
  }
}

/// Trace files (.csv, .json) of a directory in lexicographic file-name order.
inline std::vector<fs::path> list_traces(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw CliError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw CliError("no trace files in '" + dir.string() + "'");
  return files;
}

inline std::vector<Trace> load_traces(const std::vector<fs::path>& files, const Specification& spec) {
  std::vector<std::optional<Trace>> slots(files.size());
  parallel_for(files.size(), [&](std::size_t i) { slots[i] = load_trace_file(files[i], spec); });
  std::vector<Trace> out;
  out.reserve(files.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// rho[rule][trace]
inline std::vector<std::vector<RobustnessResult>> evaluate(const Specification& spec, const std::vector<Trace>& traces) {
  std::vector<std::vector<RobustnessResult>> out(spec.rules.size(), std::vector<RobustnessResult>(traces.size()));
  parallel_for(traces.size(), [&](std::size_t t) {
    for (std::size_t r = 0; r < spec.rules.size(); ++r) {
      try {
        out[r][t] = robustness(spec.rules[r].formula, traces[t], spec.rules[r].name);
      } catch (const EvalError& e) {
        throw CliError("trace '" + traces[t].id() + "': " + e.what());
      }
    }
  });
  return out;
}

inline std::vector<FleetReport> fleet_reports(const Specification& spec, const std::vector<Trace>& traces) {
  auto results = evaluate(spec, traces);
  std::vector<FleetReport> reports;
  for (std::size_t r = 0; r < spec.rules.size(); ++r)
    reports.push_back(fleet_report(spec.rules[r].name, std::span<const RobustnessResult>(results[r])));
  return reports;
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string pct(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f%%", v);
  return buf;
}

inline std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}
inline std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline ojson fleet_json(const FleetReport& r) {
  ojson j;
  j["n"] = r.n_traces;
  j["satisfaction_pct"] = r.satisfaction_pct;
  j["trv"] = r.trv;
  j["lrv"] = r.lrv;
  j["rho"] = r.rho_values;
  return j;
}

inline void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_check(const RunManifest& m, const std::string& profile_dir, std::ostream& out) {
  m.validate();
  Specification spec = load_spec(m.spec_path);
  std::vector<fs::path> files(m.trace_paths.begin(), m.trace_paths.end());
  auto traces = load_traces(files, spec);
  auto results = evaluate(spec, traces);

  bool violated = false;
  std::string text;
  ojson doc = ojson::array();
  std::size_t id_width = 5, rule_width = 4;
  for (const auto& t : traces) id_width = std::max(id_width, t.id().size());
  for (const auto& r : spec.rules) rule_width = std::max(rule_width, r.name.size());
  for (std::size_t t = 0; t < traces.size(); ++t) {
    for (std::size_t r = 0; r < spec.rules.size(); ++r) {
      const RobustnessResult& res = results[r][t];
      violated = violated || res.verdict == Verdict::violated;
      if (m.format == Format::json) {
        ojson row;
        row["trace"] = traces[t].id();
        row["rule"] = res.rule_name;
        row["rho"] = res.rho;
        row["verdict"] = to_string(res.verdict);
        doc.push_back(std::move(row));
      } else {
        text += pad_right(traces[t].id(), id_width) + "  " + pad_right(res.rule_name, rule_width) + "  " +
                pad_left(format_real(res.rho), 24) + "  " + to_string(res.verdict) + "\n";
      }
    }
  }
  if (m.format == Format::json) text = doc.dump(2) + "\n";
  emit(text, m.output_path, out);

  if (!profile_dir.empty()) {
    fs::create_directories(profile_dir);
    for (const auto& trace : traces) {
      std::vector<std::pair<std::string, std::vector<double>>> columns;
      for (const auto& rule : spec.rules)
        for (auto& [path, series] : robustness_profile(rule.formula, trace, rule.name))
          columns.emplace_back(rule.name + ":" + path, std::move(series));
      std::string csv = "time";
      for (const auto& c : columns) csv += "," + c.first;
      csv += "\n";
      for (std::size_t i = 0; i < trace.size(); ++i) {
        csv += format_real(trace.times()[i]);
        for (const auto& c : columns) csv += "," + format_real(c.second[i]);
        csv += "\n";
      }
      write_file(fs::path(profile_dir) / (trace.id() + ".profile.csv"), csv);
    }
  }
  return violated ? kViolations : kCompliant;
}

inline std::vector<Trace> load_dirs(const std::vector<std::string>& dirs, const Specification& spec) {
  std::vector<fs::path> files;
  for (const auto& d : dirs) {
    auto part = list_traces(d);
    files.insert(files.end(), part.begin(), part.end());
  }
  return load_traces(files, spec);
}

inline std::string report_table(const std::vector<FleetReport>& reports) {
  std::string text;
  for (const auto& r : reports) {
    text += "Rule: " + r.rule_name + " (" + std::to_string(r.n_traces) + " traces)\n";
    text += "  " + pad_right("Satisfaction Percentage", 28) + pad_left(pct(r.satisfaction_pct), 14) + "\n";
    text += "  " + pad_right("TRV (average performance)", 28) + pad_left(num(r.trv), 14) + "\n";
    text += "  " + pad_right("LRV (worst violation)", 28) + pad_left(num(r.lrv), 14) + "\n\n";
  }
  return text;
}

inline std::string report_json(const std::vector<FleetReport>& reports) {
  ojson doc = ojson::object();
  for (const auto& r : reports) doc[r.rule_name] = fleet_json(r);
  return doc.dump(2) + "\n";
}

inline int cmd_report(const RunManifest& m, std::ostream& out) {
  m.validate();
  Specification spec = load_spec(m.spec_path);
  auto reports = fleet_reports(spec, load_dirs(m.trace_dirs, spec));
  emit(m.format == Format::json ? report_json(reports) : report_table(reports), m.output_path, out);
  return kCompliant;
}

inline std::string compare_table(const std::vector<CompareReport>& reports) {
  std::string text;
  for (const auto& c : reports) {
    text += "Rule: " + c.rule_name + "\n";
    text += "  " + pad_right("", 28) + pad_left("Pre-Analysis", 16) + pad_left("Post-Analysis", 16) + "\n";
    text += "  " + pad_right("Satisfaction Percentage", 28) + pad_left(pct(c.pre.satisfaction_pct), 16) +
            pad_left(pct(c.post.satisfaction_pct), 16) + "\n";
    text += "  " + pad_right("TRV (average performance)", 28) + pad_left(num(c.pre.trv), 16) +
            pad_left(num(c.post.trv), 16) + "\n";
    text += "  " + pad_right("LRV (worst violation)", 28) + pad_left(num(c.pre.lrv), 16) +
            pad_left(num(c.post.lrv), 16) + "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "  Mann-Whitney U = %s (%s, two-sided), p = %.3g, %s at alpha = %s\n",
                  num(c.u_statistic).c_str(), to_string(c.method), c.p_value,
                  c.significant ? "significant" : "not significant", num(c.alpha).c_str());
    text += line;
    text += "  Satisfaction change: " + format_change(c.satisfaction_change_pct) + "\n\n";
  }
  return text;
}

inline std::string compare_json(const std::vector<CompareReport>& reports) {
  ojson doc = ojson::object();
  for (const auto& c : reports) {
    ojson j;
    j["pre"] = fleet_json(c.pre);
    j["post"] = fleet_json(c.post);
    j["u_statistic"] = c.u_statistic;
    j["p_value"] = c.p_value;
    j["method"] = to_string(c.method);
    j["alternative"] = "two-sided";
    j["alpha"] = c.alpha;
    j["significant"] = c.significant;
    if (std::isfinite(c.satisfaction_change_pct)) {
      j["satisfaction_change_pct"] = c.satisfaction_change_pct;
    } else {
      j["satisfaction_change_pct"] = nullptr;
    }
    j["satisfaction_change"] = format_change(c.satisfaction_change_pct);
    doc[c.rule_name] = std::move(j);
  }
  return doc.dump(2) + "\n";
}

inline int cmd_compare(const RunManifest& m, const std::string& pre_dir, const std::string& post_dir,
                       std::ostream& out) {
  m.validate();
  Specification spec = load_spec(m.spec_path);
  auto pre = fleet_reports(spec, load_dirs({pre_dir}, spec));
  auto post = fleet_reports(spec, load_dirs({post_dir}, spec));
  std::vector<CompareReport> reports;
  for (std::size_t r = 0; r < spec.rules.size(); ++r) reports.push_back(compare_fleets(pre[r], post[r], m.alpha));
  emit(m.format == Format::json ? compare_json(reports) : compare_table(reports), m.output_path, out);
  return kCompliant;
}

struct SimulateOptions {
  std::string config_path;
  bool preset = false;
  std::string policy;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string trace_format = "csv";
};

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (o.preset == !o.config_path.empty()) throw CliError("give exactly one of --preset or --config");
  if (o.n < 1) throw CliError("--n must be at least 1");

  sim::ScenarioConfig scenario;
  std::optional<sim::PolicyParams> params;
  if (o.preset) {
    auto p = sim::builtin_presets();
    scenario = p.scenario;
    params = o.policy == "pre" ? p.pre : p.post;
  } else {
    try {
      auto cfg = sim::parse_config(read_file(o.config_path));
      scenario = cfg.scenario;
      params = o.policy == "pre" ? cfg.pre : cfg.post;
    } catch (const sim::ConfigError& e) {
      throw CliError(o.config_path + ": " + e.what());
    }
    if (!params) throw CliError(o.config_path + ": no [" + o.policy + "] section");
  }

  std::vector<sim::EpisodeRecord> fleet;
  try {
    fleet = sim::simulate_fleet(scenario, *params, o.n, o.seed);
  } catch (const sim::ConfigError& e) {
    throw CliError(std::string("invalid configuration: ") + e.what());
  }

  fs::create_directories(o.out_dir);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(o.n - 1).size());
  std::string manifest = "# stlmon simulate manifest\n[run]\n";
  manifest += "policy = " + o.policy + "\n";
  manifest += "n = " + std::to_string(o.n) + "\n";
  manifest += "base_seed = " + std::to_string(o.seed) + "\n";
  manifest += "source = " + (o.preset ? std::string("preset") : o.config_path) + "\n";
  manifest += "format = " + o.trace_format + "\n\n";
  manifest += sim::format_scenario(scenario) + "\n";
  manifest += sim::format_policy(o.policy, *params) + "\n";
  manifest += "[episodes]\n";
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    std::string index = std::to_string(i);
    std::string name = "trace_" + std::string(width - index.size(), '0') + index + "." + o.trace_format;
    const auto& ep = fleet[i];
    write_file(fs::path(o.out_dir) / name,
               o.trace_format == "json" ? write_trace_json(ep.trace) : write_trace_csv(ep.trace));
    manifest += name + " = seed " + std::to_string(ep.seed) + " goal " + format_real(ep.goal_x) + " " +
                format_real(ep.goal_y) + " outcome " + sim::to_string(ep.outcome) + " samples " +
                std::to_string(ep.trace.size()) + "\n";
  }
  write_file(fs::path(o.out_dir) / "manifest.txt", manifest);
  out << "wrote " << fleet.size() << " traces to " << o.out_dir << "\n";
  return kCompliant;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline STL robustness monitor and fleet compliance reports", "stlmon"};
  app.require_subcommand(1);

  const std::map<std::string, Format> formats{{"json", Format::json}, {"table", Format::table}};

  RunManifest check_m, report_m, compare_m;
  std::string profile_dir, pre_dir, post_dir;
  report_m.format = Format::json;

  auto* check = app.add_subcommand("check", "Evaluate every rule on every trace; exit 1 on any violation");
  check->add_option("spec", check_m.spec_path, "Specification file (.stl)")->required();
  check->add_option("traces", check_m.trace_paths, "Trace files (.csv or .json)")->required();
  check->add_option("--format", check_m.format, "Output format")->transform(CLI::CheckedTransformer(formats));
  check->add_option("--out", check_m.output_path, "Write results to this file");
  check->add_option("--profile-dir", profile_dir, "Write per-node robustness series as CSV here");

  auto* report = app.add_subcommand("report", "Fleet metrics (satisfaction, TRV, LRV) per rule");
  report->add_option("spec", report_m.spec_path, "Specification file (.stl)")->required();
  report->add_option("trace_dir", report_m.trace_dirs, "Directories of trace files")->required();
  report->add_option("--format", report_m.format, "Output format")->transform(CLI::CheckedTransformer(formats));
  report->add_option("--out", report_m.output_path, "Write the report to this file");

  auto* compare = app.add_subcommand("compare", "Compare two fleets rule by rule (Mann-Whitney U)");
  compare->add_option("spec", compare_m.spec_path, "Specification file (.stl)")->required();
  compare->add_option("pre_dir", pre_dir, "Pre-analysis trace directory")->required();
  compare->add_option("post_dir", post_dir, "Post-analysis trace directory")->required();
  compare->add_option("--alpha", compare_m.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  compare->add_option("--format", compare_m.format, "Output format")->transform(CLI::CheckedTransformer(formats));
  compare->add_option("--out", compare_m.output_path, "Write the report to this file");

  SimulateOptions sim_o;
  auto* simulate = app.add_subcommand("simulate", "Generate a fleet of navigation traces");
  auto* cfg_opt = simulate->add_option("--config", sim_o.config_path, "Scenario/policy configuration file");
  auto* preset_opt = simulate->add_flag("--preset", sim_o.preset, "Use the built-in scenario and policies");
  cfg_opt->excludes(preset_opt);
  simulate->add_option("--policy", sim_o.policy, "Policy section to run")
      ->required()
      ->check(CLI::IsMember({"pre", "post"}));
  simulate->add_option("--n", sim_o.n, "Number of episodes")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_o.seed, "Seed of the first episode");
  simulate->add_option("--out", sim_o.out_dir, "Output directory")->required();
  simulate->add_option("--trace-format", sim_o.trace_format, "Trace file format")
      ->check(CLI::IsMember({"csv", "json"}));

  std::vector<const char*> argv{"stlmon"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kCompliant;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kCompliant;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kError;
  }

  try {
    if (*check) return cmd_check(check_m, profile_dir, out);
    if (*report) return cmd_report(report_m, out);
    if (*compare) {
      compare_m.trace_dirs = {pre_dir, post_dir};
      return cmd_compare(compare_m, pre_dir, post_dir, out);
    }
    if (*simulate) return cmd_simulate(sim_o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace stlmon::cli
