#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/env/trajectory.hpp"
#include "traj/iq/agent.hpp"

namespace traj::iq {

// Trajectory id -> conditioning embedding (posterior mean by default).
using EmbeddingTable = std::map<std::uint64_t, std::vector<double>>;

struct ReturnStats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> returns;
};

// Mean-action rollouts of a policy over the environment horizon, initial
// states drawn in order from `seed`.
std::vector<env::Rollout> mean_action_rollouts(vte::SquashedGaussianPolicy& policy, const env::Env& env,
                                               std::span<const double> cond, std::size_t rollouts,
                                               std::uint64_t seed);

// Return statistics of mean-action rollouts of any squashed Gaussian policy from initial states
// drawn with `seed`; undiscounted returns. cond is ignored when the policy
// has no conditioning input.
ReturnStats eval_policy(vte::SquashedGaussianPolicy& policy, const env::Env& env, std::span<const double> cond,
                        std::size_t rollouts, std::uint64_t seed);
ReturnStats eval_conditioned(ConditionalAgent& agent, const env::Env& env, std::span<const double> embedding,
                             std::size_t rollouts, std::uint64_t seed);

// mean_i |learned_i - target_i| / |target_i| * 100
double relative_l2_error(std::span<const double> learned, std::span<const double> target);

struct EvalRow {
  std::size_t step = 0;
  int level = 0;
  std::uint64_t source_id = 0;  // trajectory whose embedding conditioned the rollouts
  double mean_return = 0.0;
  double std = 0.0;
  double relative_l2 = 0.0;  // against the level's dataset mean return, percent
};

struct EvalPlan {
  std::size_t sources_per_level = 3;
  std::size_t rollouts = 5;
  // Condition on each level's mean embedding instead of per-trajectory ones;
  // rows then carry source id 0.
  bool level_centroid = false;
};

// One row per (level, source). Sources are spread evenly over each level's
// trajectories in dataset order.
std::vector<EvalRow> evaluate_levels(ConditionalAgent& agent, const env::Env& env, const env::AbilityDataset& data,
                                     const EmbeddingTable& table, const EvalPlan& plan, std::size_t step,
                                     std::uint64_t seed);

// Per-level mean of the rows' mean returns, ordered by level.
std::vector<double> level_means(const std::vector<EvalRow>& rows, int levels);

struct IqTrainConfig {
  double actor_lr = 3e-5;
  double critic_lr = 3e-5;
  std::size_t batch = 32;
  IqLossOptions loss;
  // Actor updates on policy-buffer states, plus the expert batch's states
  // when set.
  bool actor_on_expert_states = false;
  std::size_t env_steps = 20000;
  std::size_t env_steps_per_update = 1;
  std::size_t start_steps = 1000;  // env steps before the first update
  double target_rho = 0.995;
  std::size_t buffer_capacity = 100000;
  std::size_t eval_interval = 2000;
  EvalPlan eval;
  std::function<void(const std::vector<EvalRow>&)> on_eval;
};

struct IqTrainResult {
  std::vector<EvalRow> log;
  std::size_t updates = 0;
};

// Rollouts condition on the embedding of a dataset trajectory drawn per
// episode by cycling a shuffled order; expert transitions carry their source
// trajectory's embedding.
IqTrainResult train_cond_iq(ConditionalAgent& agent, const env::AbilityDataset& data, const EmbeddingTable& table,
                            const env::Env& env, const IqTrainConfig& config, std::uint64_t seed);

// Header: step,level,e_source_trajId,mean_return,std,relative_l2
std::string eval_log_csv(const std::vector<EvalRow>& rows);

struct BcConfig {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t epochs = 30;
  std::size_t batch = 256;  // transitions
  double lr = 1e-3;
};

// Unconditioned behavior cloning on the pooled dataset.
vte::SquashedGaussianPolicy train_bc_baseline(const env::AbilityDataset& data, const BcConfig& config,
                                              std::uint64_t seed);

}  // namespace traj::iq
