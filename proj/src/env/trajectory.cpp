#include "traj/env/trajectory.hpp"

#include "traj/error.hpp"

namespace traj::env {

StateActionView::StateActionView(const num::Tensor& states, const num::Tensor& actions)
    : states_(&states), actions_(&actions) {
  if (states.rows() != actions.rows()) {
    throw DimensionError("trajectory has " + std::to_string(states.rows()) + " states but " +
                         std::to_string(actions.rows()) + " actions");
  }
}

Trajectory::Trajectory(std::uint64_t id, num::Tensor states, num::Tensor actions, EvalLabels labels)
    : id_(id), states_(std::move(states)), actions_(std::move(actions)), labels_(labels) {
  (void)view();  // validates lengths
}

Rollout rollout(const Env& env, std::vector<double> x0, const Policy& policy) {
  const EnvSpec& spec = env.spec();
  if (x0.size() != spec.state_dim) throw DimensionError("initial state has wrong dimension");
  const std::size_t horizon = spec.horizon;
  Rollout r;
  r.states = num::Tensor::zeros(horizon, spec.state_dim);
  r.actions = num::Tensor::zeros(horizon, spec.action_dim);
  std::vector<double> x = std::move(x0);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::copy(x.begin(), x.end(), r.states.row_span(t).begin());
    Step s = env.step(x, policy(x));
    std::copy(s.action.begin(), s.action.end(), r.actions.row_span(t).begin());
    r.rewards.push_back(s.reward);
    r.total_return += s.reward;
    if (s.phase_switch) r.switch_steps.push_back(t);
    x = std::move(s.next_state);
  }
  return r;
}

double recompute_return(const Env& env, const StateActionView& view) {
  double total = 0.0;
  for (std::size_t t = 0; t < view.length(); ++t) {
    total += env.step(view.states().row_span(t), view.actions().row_span(t)).reward;
  }
  return total;
}

std::vector<std::size_t> replay_switch_steps(const Env& env, const StateActionView& view) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t + 1 < view.length(); ++t) {
    if (env.step(view.states().row_span(t), view.actions().row_span(t)).phase_switch) out.push_back(t + 1);
  }
  return out;
}

}  // namespace traj::env
