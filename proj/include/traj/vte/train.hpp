#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/hssm/model.hpp"
#include "traj/vte/encoder.hpp"
#include "traj/vte/policy.hpp"

namespace traj::vte {

// -sum_t log p(a_t | x_t, e) for one trajectory; e is 1 x d.
num::Var reconstruction_loss(num::Graph& g, SquashedGaussianPolicy& policy, const env::StateActionView& traj,
                             num::Var embedding);

struct LossWeights {
  double bc_alpha = 0.5;
  double kld_alpha = 1.0;
};

struct VteLossTerms {
  num::Var loss;
  num::Var reconstruction;  // mean over the batch of per-trajectory sums
  num::Var kld;             // mean over the batch
  num::Var mu, log_var, sample;
};

// One reparameterized sample per trajectory with noise from `seed`.
VteLossTerms vte_loss(num::Graph& g, VteEncoder& encoder, SquashedGaussianPolicy& policy,
                      const std::vector<const hssm::SkillAnnotation*>& annotations,
                      const std::vector<env::StateActionView>& trajectories, const LossWeights& weights,
                      std::uint64_t seed);

struct VteEpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double kld = 0.0;
  double drift = 0.0;  // mean inf-norm change of mu over the early-stop window; NaN before it fills
};

struct VteTrainConfig {
  std::size_t epochs = 60;
  std::size_t batch = 16;
  double lr = 1e-3;
  LossWeights weights;
  double early_stop_eps = 1e-3;
  std::size_t early_stop_window = 5;
  double divergence_limit = 1e7;
  std::function<void(const VteEpochLog&)> on_epoch;
};

struct VteTrainResult {
  std::vector<TrajectoryEmbedding> embeddings;  // dataset order
  std::vector<VteEpochLog> log;
};

// Annotations are fixed inputs; no gradient reaches the skill model.
VteTrainResult train_vte(VteEncoder& encoder, SquashedGaussianPolicy& policy, const env::AbilityDataset& data,
                         const std::vector<hssm::SkillAnnotation>& annotations, const VteTrainConfig& config,
                         std::uint64_t seed);
VteTrainResult train_vte(VteEncoder& encoder, SquashedGaussianPolicy& policy, const env::AbilityDataset& data,
                         hssm::HssmModel& skills, const VteTrainConfig& config, std::uint64_t seed);

// Header: trajId,ability,mu_0..mu_{d-1},sigma_0..sigma_{d-1}. Ability is
// read through the evaluation accessor.
std::string embedding_csv(const std::vector<TrajectoryEmbedding>& embeddings, const env::AbilityDataset& data);

std::vector<std::uint64_t> trajectory_ids(const env::AbilityDataset& data);

}  // namespace traj::vte
