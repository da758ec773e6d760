#pragma once

#include <span>
#include <string>
#include <vector>

#include "traj/env/trajectory.hpp"
#include "traj/num/checkpoint.hpp"
#include "traj/num/nn.hpp"

namespace traj::vte {

// Tanh-squashed Gaussian over a box: a = center + half * tanh(u), u ~ N(mean(x, c), std).
// The log-std is state independent and clamped to [-5, 2]. With cond_dim 0
// the policy ignores the conditioning input.
class SquashedGaussianPolicy {
 public:
  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(const std::string& name, std::size_t state_dim, std::size_t cond_dim,
                         std::vector<double> action_low, std::vector<double> action_high,
                         const std::vector<std::size_t>& hidden, num::Rng& rng);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t cond_dim() const { return cond_dim_; }
  std::size_t action_dim() const { return center_.size(); }

  // Pre-squash mean, N x action_dim. cond is N x cond_dim (ignored when cond_dim is 0).
  num::Var pre_mean(num::Graph& g, num::Var states, num::Var cond);
  num::Var log_std(num::Graph& g);

  // Per-row log density of recorded actions, N x 1. Actions at the bounds are
  // pulled inside by 1e-6 before the inverse squash, with a warning.
  num::Var log_prob(num::Graph& g, num::Var states, num::Var cond, const num::Tensor& actions);

  struct Sample {
    num::Var action;    // N x action_dim
    num::Var log_prob;  // N x 1
  };
  // Reparameterized sample with standard normal noise (N x action_dim).
  Sample rsample(num::Graph& g, num::Var states, num::Var cond, const num::Tensor& noise);

  // Squashed mean, no gradient.
  std::vector<double> mean_action(std::span<const double> state, std::span<const double> cond);
  num::Tensor mean_actions(const num::Tensor& states, const num::Tensor& cond);

  void collect(std::vector<num::Parameter*>& out);
  std::vector<num::Parameter*> parameters();
  void store(num::TensorMap& map, const std::string& prefix);
  void load(const num::TensorMap& map, const std::string& prefix);

  num::Mlp body;
  num::Parameter log_std_param;  // 1 x action_dim

 private:
  num::Var squash(num::Graph& g, num::Var u);

  std::size_t state_dim_ = 0;
  std::size_t cond_dim_ = 0;
  std::vector<double> center_, half_;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

}  // namespace traj::vte
