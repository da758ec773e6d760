#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "traj/env/env.hpp"
#include "traj/num/tensor.hpp"

namespace traj::env {

// What encoders may see: states and actions, nothing else.
class StateActionView {
 public:
  StateActionView(const num::Tensor& states, const num::Tensor& actions);

  const num::Tensor& states() const { return *states_; }
  const num::Tensor& actions() const { return *actions_; }
  std::size_t length() const { return states_->rows(); }
  std::size_t state_dim() const { return states_->cols(); }
  std::size_t action_dim() const { return actions_->cols(); }

 private:
  const num::Tensor* states_;
  const num::Tensor* actions_;
};

// Ground truth used only by evaluation code.
struct EvalLabels {
  double return_label = 0.0;
  int ability = 0;

  friend bool operator==(const EvalLabels&, const EvalLabels&) = default;
};

class Trajectory {
 public:
  Trajectory(std::uint64_t id, num::Tensor states, num::Tensor actions, EvalLabels labels);

  std::uint64_t id() const { return id_; }
  std::size_t length() const { return states_.rows(); }
  StateActionView view() const { return StateActionView(states_, actions_); }
  // Evaluation-only accessor; training paths for encoders never call it.
  const EvalLabels& eval_labels() const { return labels_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::uint64_t id_;
  num::Tensor states_;
  num::Tensor actions_;
  EvalLabels labels_;
};

using Policy = std::function<std::vector<double>(std::span<const double> state)>;

struct Rollout {
  num::Tensor states;   // T x state_dim, x_0 .. x_{T-1}
  num::Tensor actions;  // T x action_dim, clipped
  std::vector<double> rewards;
  std::vector<std::size_t> switch_steps;  // steps t whose transition advanced the phase
  double total_return = 0.0;
};

Rollout rollout(const Env& env, std::vector<double> x0, const Policy& policy);

// Sum of rewards obtained by replaying the recorded actions from each
// recorded state.
double recompute_return(const Env& env, const StateActionView& view);

// Steps t whose state is the first after a phase switch, found by replaying
// the recorded actions.
std::vector<std::size_t> replay_switch_steps(const Env& env, const StateActionView& view);

}  // namespace traj::env
