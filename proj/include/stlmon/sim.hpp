#pragma once

// Seeded 2D unicycle navigation simulator producing rollout-trace fleets.
//
// The robot starts at the origin facing +x, moves at constant speed and picks
// its turn rate from a 5-entry menu.  Episodes end on reaching the goal,
// collision or the step limit.  Traces are indexed by step number, so rule
// bounds read as timesteps.
//
// Random streams (pinned so fleets are reproducible bit for bit):
//   mix(a, b)      = splitmix64(a ^ splitmix64(b))
//   goal stream    = mt19937_64(mix(goal_sampler.seed, episode_seed))
//   noise stream   = mt19937_64(mix(0x6e6f697365, episode_seed))
//   uniform()      = ((engine() >> 11) + 0.5) * 2^-53             in (0, 1)
//   gaussian()     = sqrt(-2 ln u1) * cos(2 pi u2), two uniforms per draw

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stlmon/parallel.hpp"
#include "stlmon/trace.hpp"

namespace stlmon::sim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
};

struct GoalSampler {
  std::uint64_t seed = 0;
  double min_radius = 0.0;
  double max_radius = 0.0;
};

struct ScenarioConfig {
  double map_half_extent = 2.5;  // m
  std::vector<Obstacle> obstacles;
  GoalSampler goal_sampler;
  double linear_speed = 0.15;  // m/s
  double dt = 0.1;             // s
  std::size_t max_steps = 800;
  std::array<double, 5> angular_menu{};  // rad/s

  void validate() const {
    if (!(map_half_extent > 0) || !std::isfinite(map_half_extent))
      throw ConfigError("map_half_extent must be positive");
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
    if (!(linear_speed >= 0) || !std::isfinite(linear_speed))
      throw ConfigError("linear_speed must be nonnegative");
    for (const auto& o : obstacles) {
      if (!(o.radius > 0) || !std::isfinite(o.x) || !std::isfinite(o.y))
        throw ConfigError("obstacle radius must be positive");
      if (std::hypot(o.x, o.y) <= o.radius) throw ConfigError("an obstacle covers the origin");
    }
    if (!(goal_sampler.min_radius >= 0) || !(goal_sampler.max_radius >= goal_sampler.min_radius))
      throw ConfigError("goal_sampler radii must satisfy 0 <= min <= max");
    for (std::size_t i = 0; i < angular_menu.size(); ++i) {
      if (!std::isfinite(angular_menu[i])) throw ConfigError("angular_menu entries must be finite");
      if (angular_menu[i] != -angular_menu[angular_menu.size() - 1 - i])
        throw ConfigError("angular_menu must be symmetric about 0");
    }
  }
};

struct PolicyParams {
  double turn_gain = 1.0;
  double noise_std = 0.0;  // rad/s
  double repulsion_gain = 0.0;
  double repulsion_range = 0.5;  // m
  double turn_smoothing = 0.0;   // [0, 1]

  void validate() const {
    if (!(noise_std >= 0)) throw ConfigError("noise_std must be nonnegative");
    if (!(turn_smoothing >= 0 && turn_smoothing <= 1)) throw ConfigError("turn_smoothing must lie in [0, 1]");
    if (!(repulsion_range > 0)) throw ConfigError("repulsion_range must be positive");
    if (!std::isfinite(turn_gain) || !std::isfinite(repulsion_gain))
      throw ConfigError("policy gains must be finite");
  }
};

enum class Outcome { goal_reached, collision, timeout };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::goal_reached: return "goal_reached";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

struct EpisodeRecord {
  Trace trace;  // channels: x, y, phi, dist_obst, goal_reached, speed
  std::uint64_t seed = 0;
  double goal_x = 0.0;
  double goal_y = 0.0;
  Outcome outcome = Outcome::timeout;
};

inline constexpr double kGoalTolerance = 0.2;  // m
inline constexpr double kGoalClearance = 0.75;  // m, from obstacles and walls when sampling goals

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Geometry

/// Signed clearance to the nearest obstacle surface or wall.
inline double obstacle_distance(const ScenarioConfig& cfg, double x, double y) {
  double d = cfg.map_half_extent - std::max(std::abs(x), std::abs(y));
  for (const auto& o : cfg.obstacles) d = std::min(d, std::hypot(x - o.x, y - o.y) - o.radius);
  return d;
}

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

namespace detail {

// Steering away from things ahead: each obstacle or wall within range and in
// front pushes the turn rate toward the other side.
inline double repulsion(const ScenarioConfig& cfg, const PolicyParams& p, double x, double y, double phi) {
  if (p.repulsion_gain == 0.0) return 0.0;
  double total = 0.0;
  auto push = [&](double dist, double bearing) {
    if (dist >= p.repulsion_range) return;
    double rel = wrap_angle(bearing - phi);
    if (std::abs(rel) >= std::numbers::pi / 2) return;
    double side = rel >= 0 ? 1.0 : -1.0;
    total -= side * p.repulsion_gain * (1.0 - std::max(dist, 0.0) / p.repulsion_range) * std::cos(rel);
  };
  for (const auto& o : cfg.obstacles)
    push(std::hypot(x - o.x, y - o.y) - o.radius, std::atan2(o.y - y, o.x - x));
  const double h = cfg.map_half_extent;
  push(h - x, 0.0);
  push(h + x, std::numbers::pi);
  push(h - y, std::numbers::pi / 2);
  push(h + y, -std::numbers::pi / 2);
  return total;
}

inline double nearest_menu_entry(const std::array<double, 5>& menu, double desired) {
  double best = menu[0];
  for (double w : menu) {
    double d = std::abs(w - desired), bd = std::abs(best - desired);
    if (d < bd || (d == bd && std::abs(w) < std::abs(best))) best = w;
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Episodes

/// Draws a goal at radius in [min, max] and uniform bearing, resampling until
/// it keeps kGoalClearance from obstacles and walls.  A zero radius range
/// yields its only point without a clearance check.
inline std::pair<double, double> sample_goal(const ScenarioConfig& cfg, std::uint64_t episode_seed) {
  const auto& gs = cfg.goal_sampler;
  RandomStream rng(mix_seed(gs.seed, episode_seed));
  for (int attempt = 0; attempt < 10000; ++attempt) {
    double r = gs.min_radius + (gs.max_radius - gs.min_radius) * rng.uniform();
    double theta = 2.0 * std::numbers::pi * rng.uniform() - std::numbers::pi;
    double gx = r * std::cos(theta), gy = r * std::sin(theta);
    if (gs.max_radius == 0.0 || obstacle_distance(cfg, gx, gy) >= kGoalClearance) return {gx, gy};
  }
  throw ConfigError("goal_sampler cannot place a goal clear of obstacles");
}

/// Runs one episode toward an explicit goal.
inline EpisodeRecord simulate_episode_to(const ScenarioConfig& cfg, const PolicyParams& params, std::uint64_t seed,
                                         double goal_x, double goal_y) {
  cfg.validate();
  params.validate();
  RandomStream noise(mix_seed(0x6e6f697365ULL, seed));

  std::vector<double> t, xs, ys, phis, dists, speeds;
  std::vector<std::uint8_t> reached;
  double x = 0.0, y = 0.0, phi = 0.0;
  auto record = [&](std::size_t step, double speed, bool at_goal) {
    t.push_back(static_cast<double>(step));
    xs.push_back(x);
    ys.push_back(y);
    phis.push_back(phi);
    dists.push_back(obstacle_distance(cfg, x, y));
    reached.push_back(at_goal ? 1 : 0);
    speeds.push_back(speed);
  };
  auto at_goal = [&] { return std::hypot(goal_x - x, goal_y - y) <= kGoalTolerance; };

  Outcome outcome = Outcome::timeout;
  record(0, cfg.linear_speed, at_goal());
  if (reached.back()) {
    outcome = Outcome::goal_reached;
    record(1, 0.0, true);  // halted; keeps the two-sample minimum
  } else {
    double desired_prev = 0.0;
    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
      double heading_error = wrap_angle(std::atan2(goal_y - y, goal_x - x) - phi);
      double drive = params.turn_gain * heading_error + detail::repulsion(cfg, params, x, y, phi) +
                     params.noise_std * noise.gaussian();
      double desired = params.turn_smoothing * desired_prev + (1.0 - params.turn_smoothing) * drive;
      desired_prev = desired;
      double omega = detail::nearest_menu_entry(cfg.angular_menu, desired);

      x += cfg.linear_speed * std::cos(phi) * cfg.dt;
      y += cfg.linear_speed * std::sin(phi) * cfg.dt;
      phi += omega * cfg.dt;
      bool done = at_goal();
      record(step, cfg.linear_speed, done);
      if (done) {
        outcome = Outcome::goal_reached;
        break;
      }
      if (dists.back() <= 0.0) {
        outcome = Outcome::collision;
        break;
      }
    }
    if (t.size() < 2) record(1, 0.0, false);  // unreachable while max_steps >= 1
  }

  std::vector<Channel> channels;
  channels.push_back({"x", Series::real(std::move(xs))});
  channels.push_back({"y", Series::real(std::move(ys))});
  channels.push_back({"phi", Series::real(std::move(phis))});
  channels.push_back({"dist_obst", Series::real(std::move(dists))});
  channels.push_back({"goal_reached", Series::boolean(std::move(reached))});
  channels.push_back({"speed", Series::real(std::move(speeds))});
  return EpisodeRecord{Trace("episode_" + std::to_string(seed), std::move(t), std::move(channels)), seed, goal_x,
                       goal_y, outcome};
}

inline EpisodeRecord simulate_episode(const ScenarioConfig& cfg, const PolicyParams& params, std::uint64_t seed) {
  cfg.validate();
  auto [gx, gy] = sample_goal(cfg, seed);
  return simulate_episode_to(cfg, params, seed, gx, gy);
}

/// Episodes for seeds base_seed .. base_seed + n - 1, in seed order.
inline std::vector<EpisodeRecord> simulate_fleet(const ScenarioConfig& cfg, const PolicyParams& params,
                                                 std::size_t n, std::uint64_t base_seed) {
  if (n < 1) throw ConfigError("fleet size must be at least 1");
  cfg.validate();
  params.validate();
  std::vector<std::optional<EpisodeRecord>> slots(n);
  parallel_for(n, [&](std::size_t i) { slots[i] = simulate_episode(cfg, params, base_seed + i); });
  std::vector<EpisodeRecord> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct Presets {
  ScenarioConfig scenario;
  PolicyParams pre;
  PolicyParams post;
};

/// 6 x 6 m arena with four round obstacles around the start; goals lie beyond
/// them.  "pre" is a noisy, twitchy policy with weak obstacle avoidance,
/// "post" a smoothed one with strong avoidance.
inline Presets builtin_presets() {
  Presets p;
  p.scenario.map_half_extent = 3.0;
  p.scenario.obstacles = {{1.1, 0.0, 0.25}, {-1.1, 0.0, 0.25}, {0.0, 1.1, 0.25}, {0.0, -1.1, 0.25}};
  p.scenario.goal_sampler = {20240607, 1.6, 2.2};
  p.scenario.linear_speed = 0.15;
  p.scenario.dt = 0.1;
  p.scenario.max_steps = 800;
  p.scenario.angular_menu = {-3.0, -1.5, 0.0, 1.5, 3.0};

  p.pre = {.turn_gain = 0.8, .noise_std = 2.5, .repulsion_gain = 0.3, .repulsion_range = 0.4,
           .turn_smoothing = 0.0};
  p.post = {.turn_gain = 1.5, .noise_std = 0.4, .repulsion_gain = 3.0, .repulsion_range = 0.8,
            .turn_smoothing = 0.6};
  return p;
}

// ---------------------------------------------------------------------------
// Configuration files
//
//   # comment
//   [scenario]
//   map_half_extent = 3
//   obstacles = 1.1 0 0.25; -1.1 0 0.25
//   goal_sampler = <seed> <min_radius> <max_radius>
//   linear_speed = 0.15
//   dt = 0.1
//   max_steps = 800
//   angular_menu = -3 -1.5 0 1.5 3
//   [pre]            (and [post]: turn_gain, noise_std, repulsion_gain,
//   turn_gain = 2    repulsion_range, turn_smoothing)

namespace detail {

inline std::vector<double> numbers(std::string_view text, const std::string& key) {
  std::vector<double> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    double v;
    auto res = std::from_chars(word.data(), word.data() + word.size(), v);
    if (res.ec != std::errc{} || res.ptr != word.data() + word.size())
      throw ConfigError("bad number '" + word + "' for key '" + key + "'");
    out.push_back(v);
  }
  return out;
}

inline double single(std::string_view text, const std::string& key) {
  auto v = numbers(text, key);
  if (v.size() != 1) throw ConfigError("key '" + key + "' takes one number");
  return v[0];
}

inline std::uint64_t unsigned_integer(std::string_view text, const std::string& key) {
  std::string s(stlmon::detail::trim(text));
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "' takes a nonnegative integer");
  return v;
}

}  // namespace detail

struct ConfigFile {
  ScenarioConfig scenario;
  std::optional<PolicyParams> pre;
  std::optional<PolicyParams> post;
};

inline ConfigFile parse_config(std::string_view text) {
  ConfigFile out;
  std::set<std::string> seen_scenario;
  std::set<std::string> seen_policy[2];
  PolicyParams policy[2];
  std::string section = "scenario";
  std::size_t lineno = 0;
  for (auto raw : stlmon::detail::split_lines(text)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = stlmon::detail::trim(line);
    if (line.empty()) continue;
    auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "malformed section header");
      section = std::string(stlmon::detail::trim(line.substr(1, line.size() - 2)));
      if (section != "scenario" && section != "pre" && section != "post" && section != "run" &&
          section != "episodes")
        throw ConfigError(where() + "unknown section '" + section + "'");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected 'key = value'");
    std::string key(stlmon::detail::trim(line.substr(0, eq)));
    std::string_view value = stlmon::detail::trim(line.substr(eq + 1));
    if (section == "run" || section == "episodes") continue;  // manifest bookkeeping

    try {
      if (section == "scenario") {
        if (!seen_scenario.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
        ScenarioConfig& c = out.scenario;
        if (key == "map_half_extent") {
          c.map_half_extent = detail::single(value, key);
        } else if (key == "obstacles") {
          c.obstacles.clear();
          std::size_t start = 0;
          while (start <= value.size()) {
            auto semi = value.find(';', start);
            auto part = stlmon::detail::trim(value.substr(start, semi == std::string_view::npos ? semi : semi - start));
            if (!part.empty()) {
              auto v = detail::numbers(part, key);
              if (v.size() != 3) throw ConfigError("each obstacle is 'x y radius'");
              c.obstacles.push_back({v[0], v[1], v[2]});
            }
            if (semi == std::string_view::npos) break;
            start = semi + 1;
          }
        } else if (key == "goal_sampler") {
          std::istringstream in{std::string(value)};
          std::string seed, lo, hi, extra;
          if (!(in >> seed >> lo >> hi) || (in >> extra))
            throw ConfigError("goal_sampler is '<seed> <min_radius> <max_radius>'");
          c.goal_sampler = {detail::unsigned_integer(seed, key), detail::single(lo, key), detail::single(hi, key)};
        } else if (key == "linear_speed") {
          c.linear_speed = detail::single(value, key);
        } else if (key == "dt") {
          c.dt = detail::single(value, key);
        } else if (key == "max_steps") {
          c.max_steps = detail::unsigned_integer(value, key);
        } else if (key == "angular_menu") {
          auto v = detail::numbers(value, key);
          if (v.size() != 5) throw ConfigError("angular_menu takes exactly 5 numbers");
          std::copy(v.begin(), v.end(), c.angular_menu.begin());
        } else {
          throw ConfigError("unknown key '" + key + "'");
        }
      } else {
        int idx = section == "pre" ? 0 : 1;
        if (!seen_policy[idx].insert(key).second) throw ConfigError("duplicate key '" + key + "'");
        PolicyParams& p = policy[idx];
        double v = detail::single(value, key);
        if (key == "turn_gain") p.turn_gain = v;
        else if (key == "noise_std") p.noise_std = v;
        else if (key == "repulsion_gain") p.repulsion_gain = v;
        else if (key == "repulsion_range") p.repulsion_range = v;
        else if (key == "turn_smoothing") p.turn_smoothing = v;
        else throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }

  static const char* scenario_keys[] = {"map_half_extent", "obstacles", "goal_sampler", "linear_speed",
                                        "dt",              "max_steps", "angular_menu"};
  for (const char* k : scenario_keys)
    if (!seen_scenario.count(k)) throw ConfigError(std::string("missing scenario key '") + k + "'");
  out.scenario.validate();
  static const char* policy_keys[] = {"turn_gain", "noise_std", "repulsion_gain", "repulsion_range",
                                      "turn_smoothing"};
  for (int idx = 0; idx < 2; ++idx) {
    if (seen_policy[idx].empty()) continue;
    for (const char* k : policy_keys)
      if (!seen_policy[idx].count(k))
        throw ConfigError(std::string("missing key '") + k + "' in [" + (idx ? "post" : "pre") + "]");
    policy[idx].validate();
    (idx ? out.post : out.pre) = policy[idx];
  }
  return out;
}

inline std::string format_scenario(const ScenarioConfig& c) {
  std::string out = "[scenario]\n";
  out += "map_half_extent = " + format_real(c.map_half_extent) + "\n";
  out += "obstacles = ";
  for (std::size_t i = 0; i < c.obstacles.size(); ++i) {
    const auto& o = c.obstacles[i];
    out += (i ? "; " : "") + format_real(o.x) + " " + format_real(o.y) + " " + format_real(o.radius);
  }
  out += "\n";
  out += "goal_sampler = " + std::to_string(c.goal_sampler.seed) + " " + format_real(c.goal_sampler.min_radius) +
         " " + format_real(c.goal_sampler.max_radius) + "\n";
  out += "linear_speed = " + format_real(c.linear_speed) + "\n";
  out += "dt = " + format_real(c.dt) + "\n";
  out += "max_steps = " + std::to_string(c.max_steps) + "\n";
  out += "angular_menu =";
  for (double w : c.angular_menu) out += " " + format_real(w);
  out += "\n";
  return out;
}

inline std::string format_policy(const std::string& section, const PolicyParams& p) {
  std::string out = "[" + section + "]\n";
  out += "turn_gain = " + format_real(p.turn_gain) + "\n";
  out += "noise_std = " + format_real(p.noise_std) + "\n";
  out += "repulsion_gain = " + format_real(p.repulsion_gain) + "\n";
  out += "repulsion_range = " + format_real(p.repulsion_range) + "\n";
  out += "turn_smoothing = " + format_real(p.turn_smoothing) + "\n";
  return out;
}

}  // namespace stlmon::sim
