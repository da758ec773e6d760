#include "traj/env/env.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "traj/error.hpp"

namespace traj::env {

double EnvSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw Error("environment '" + name + "' has no parameter '" + key + "'");
  return it->second;
}

void EnvSpec::validate() const {
  if (horizon < 2) throw Error("horizon must be at least 2");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("discount must lie in (0, 1)");
  if (action_low.size() != action_dim || action_high.size() != action_dim) throw Error("action bounds size mismatch");
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!(action_low[i] < action_high[i])) throw Error("action bound low >= high in dimension " + std::to_string(i));
  }
}

nlohmann::json to_json(const EnvSpec& spec) {
  return {{"name", spec.name},           {"state_dim", spec.state_dim}, {"action_dim", spec.action_dim},
          {"action_low", spec.action_low}, {"action_high", spec.action_high}, {"horizon", spec.horizon},
          {"gamma", spec.gamma},         {"params", spec.params}};
}

EnvSpec spec_from_json(const nlohmann::json& j) {
  EnvSpec s;
  s.name = j.at("name").get<std::string>();
  s.state_dim = j.at("state_dim").get<std::size_t>();
  s.action_dim = j.at("action_dim").get<std::size_t>();
  s.action_low = j.at("action_low").get<std::vector<double>>();
  s.action_high = j.at("action_high").get<std::vector<double>>();
  s.horizon = j.at("horizon").get<std::size_t>();
  s.gamma = j.at("gamma").get<double>();
  s.params = j.at("params").get<std::map<std::string, double>>();
  s.validate();
  return s;
}

std::vector<double> Env::clip(std::span<const double> action) const {
  if (action.size() != spec_.action_dim) {
    throw DimensionError("action has " + std::to_string(action.size()) + " entries, environment expects " +
                         std::to_string(spec_.action_dim));
  }
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], spec_.action_low[i], spec_.action_high[i]);
  return out;
}

namespace {

// State (px, py, vx, vy, dx, dy); (dx, dy) points from the agent to the
// current waypoint, so the waypoint is recoverable as p + d.
class Waypoint2d final : public Env {
 public:
  explicit Waypoint2d(EnvSpec spec) : Env(std::move(spec)) {
    const double side = this->spec().param("side");
    waypoints_ = {{{side, 0.0}, {side, side}, {0.0, side}, {0.0, 0.0}}};
  }

  std::vector<double> initial_state(num::Rng& rng) const override {
    const double jitter = spec().param("start_jitter");
    const double px = rng.uniform(-jitter, jitter);
    const double py = rng.uniform(-jitter, jitter);
    const auto& w = waypoints_[0];
    return {px, py, 0.0, 0.0, w[0] - px, w[1] - py};
  }

  Step step(std::span<const double> x, std::span<const double> action) const override {
    check_state(x);
    Step out;
    out.action = clip(action);
    const double dt = spec().param("dt"), damping = spec().param("damping"), accel = spec().param("accel");
    const std::size_t target = waypoint_index(x);
    const auto& w = waypoints_[target];
    const double vx = (1.0 - damping * dt) * x[2] + accel * dt * out.action[0];
    const double vy = (1.0 - damping * dt) * x[3] + accel * dt * out.action[1];
    const double px = x[0] + dt * vx;
    const double py = x[1] + dt * vy;
    const double before = std::hypot(w[0] - x[0], w[1] - x[1]);
    const double after = std::hypot(w[0] - px, w[1] - py);
    const double cost = spec().param("control_cost") * (out.action[0] * out.action[0] + out.action[1] * out.action[1]);
    out.reward = (before - after) - cost;
    std::size_t next = target;
    if (after < spec().param("radius")) {
      next = (target + 1) % waypoints_.size();
      out.phase_switch = true;
    }
    const auto& nw = waypoints_[next];
    out.next_state = {px, py, vx, vy, nw[0] - px, nw[1] - py};
    return out;
  }

  std::vector<double> heading(std::span<const double> x) const override {
    const double n = std::hypot(x[4], x[5]);
    if (n < 1e-12) return {0.0, 0.0};
    return {x[4] / n, x[5] / n};
  }

  std::vector<double> velocity(std::span<const double> x) const override { return {x[2], x[3]}; }

  std::pair<double, double> position(std::span<const double> x) const override { return {x[0], x[1]}; }

 private:
  void check_state(std::span<const double> x) const {
    if (x.size() != 6) throw DimensionError("waypoint2d state must have 6 entries");
  }

  std::size_t waypoint_index(std::span<const double> x) const {
    const double wx = x[0] + x[4], wy = x[1] + x[5];
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < waypoints_.size(); ++i) {
      const double d = std::hypot(waypoints_[i][0] - wx, waypoints_[i][1] - wy);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  std::array<std::array<double, 2>, 4> waypoints_{};
};

// State (x, v); reward is forward velocity minus control cost.
class Linewalker1d final : public Env {
 public:
  explicit Linewalker1d(EnvSpec spec) : Env(std::move(spec)) {}

  std::vector<double> initial_state(num::Rng& rng) const override {
    const double jitter = spec().param("start_jitter");
    return {rng.uniform(-jitter, jitter), 0.0};
  }

  Step step(std::span<const double> x, std::span<const double> action) const override {
    if (x.size() != 2) throw DimensionError("linewalker1d state must have 2 entries");
    Step out;
    out.action = clip(action);
    const double dt = spec().param("dt"), damping = spec().param("damping");
    const double a = out.action[0];
    const double v = x[1] + dt * (a - damping * x[1]);
    out.next_state = {x[0] + dt * v, v};
    out.reward = v - spec().param("control_cost") * a * a;
    return out;
  }

  std::vector<double> heading(std::span<const double>) const override { return {1.0}; }
  std::vector<double> velocity(std::span<const double> x) const override { return {x[1]}; }
  std::pair<double, double> position(std::span<const double> x) const override { return {x[0], 0.0}; }
};

}  // namespace

EnvSpec default_spec(const std::string& name, std::size_t horizon) {
  EnvSpec s;
  s.name = name;
  s.horizon = horizon;
  s.gamma = 0.99;
  if (name == "waypoint2d") {
    s.state_dim = 6;
    s.action_dim = 2;
    s.params = {{"dt", 0.1},     {"damping", 0.5},      {"accel", 2.0}, {"radius", 0.25},
                {"side", 2.0},   {"control_cost", 0.01}, {"start_jitter", 0.2}};
  } else if (name == "linewalker1d") {
    s.state_dim = 2;
    s.action_dim = 1;
    s.params = {{"dt", 0.1}, {"damping", 0.5}, {"control_cost", 0.1}, {"start_jitter", 0.1}};
  } else {
    throw Error("unknown environment '" + name + "' (known: waypoint2d, linewalker1d)");
  }
  s.action_low.assign(s.action_dim, -1.0);
  s.action_high.assign(s.action_dim, 1.0);
  return s;
}

std::unique_ptr<Env> make_env(const std::string& name, std::size_t horizon) {
  return make_env(default_spec(name, horizon));
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  if (spec.name == "waypoint2d") return std::make_unique<Waypoint2d>(spec);
  if (spec.name == "linewalker1d") return std::make_unique<Linewalker1d>(spec);
  throw Error("unknown environment '" + spec.name + "' (known: waypoint2d, linewalker1d)");
}

}  // namespace traj::env
