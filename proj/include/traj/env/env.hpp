#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traj/num/rng.hpp"

namespace traj::env {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t horizon = 100;
  double gamma = 0.99;
  // Dynamics and reward constants, keyed by name.
  std::map<std::string, double> params;

  double param(const std::string& key) const;
  void validate() const;

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

nlohmann::json to_json(const EnvSpec& spec);
EnvSpec spec_from_json(const nlohmann::json& j);

struct Step {
  std::vector<double> next_state;
  std::vector<double> action;  // after clipping to bounds
  double reward = 0.0;
  bool phase_switch = false;  // waypoint2d: the target waypoint advanced
};

// Deterministic MDP. step() is a pure function of (state, action); all
// randomness lives in initial_state.
class Env {
 public:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  virtual std::vector<double> initial_state(num::Rng& rng) const = 0;
  virtual Step step(std::span<const double> state, std::span<const double> action) const = 0;
  // Target velocity direction the scripted controllers steer along.
  virtual std::vector<double> heading(std::span<const double> state) const = 0;
  // Velocity components of a state.
  virtual std::vector<double> velocity(std::span<const double> state) const = 0;
  // Planar position for trace plots (linewalker uses (x, 0)).
  virtual std::pair<double, double> position(std::span<const double> state) const = 0;

  std::vector<double> clip(std::span<const double> action) const;

 private:
  EnvSpec spec_;
};

// Known names: waypoint2d, linewalker1d.
std::unique_ptr<Env> make_env(const std::string& name, std::size_t horizon = 100);
std::unique_ptr<Env> make_env(const EnvSpec& spec);
EnvSpec default_spec(const std::string& name, std::size_t horizon = 100);

}  // namespace traj::env
