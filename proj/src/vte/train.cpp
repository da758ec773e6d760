#include "traj/vte/train.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "traj/error.hpp"
#include "traj/hssm/skills.hpp"
#include "traj/log.hpp"
#include "traj/num/adam.hpp"

namespace traj::vte {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

struct Stacked {
  Tensor states, actions;
};

Stacked stack(const std::vector<env::StateActionView>& trajs) {
  const std::size_t T = trajs[0].length(), sd = trajs[0].state_dim(), ad = trajs[0].action_dim();
  Stacked s{Tensor::zeros(trajs.size() * T, sd), Tensor::zeros(trajs.size() * T, ad)};
  for (std::size_t b = 0; b < trajs.size(); ++b) {
    if (trajs[b].length() != T) throw DimensionError("vte: trajectories in a batch must share their length");
    std::copy(trajs[b].states().data().begin(), trajs[b].states().data().end(),
              s.states.data().begin() + static_cast<std::ptrdiff_t>(b * T * sd));
    std::copy(trajs[b].actions().data().begin(), trajs[b].actions().data().end(),
              s.actions.data().begin() + static_cast<std::ptrdiff_t>(b * T * ad));
  }
  return s;
}

// Per-trajectory negative log-likelihood, B x 1.
Var batch_reconstruction(Graph& g, SquashedGaussianPolicy& policy, const std::vector<env::StateActionView>& trajs,
                         Var embeddings) {
  const std::size_t T = trajs[0].length();
  Stacked s = stack(trajs);
  Var log_prob = policy.log_prob(g, g.constant(s.states), num::repeat_rows(embeddings, T), s.actions);
  return num::neg(num::segment_mean(log_prob, T)) * g.constant(Tensor(std::vector<std::size_t>{trajs.size(), 1},
                                                                      static_cast<double>(T)));
}

}  // namespace

Var reconstruction_loss(Graph& g, SquashedGaussianPolicy& policy, const env::StateActionView& traj, Var embedding) {
  if (!embedding.value().all_finite()) throw NumericError("reconstruction_loss: embedding is not finite");
  return num::sum(batch_reconstruction(g, policy, {traj}, embedding));
}

VteLossTerms vte_loss(Graph& g, VteEncoder& encoder, SquashedGaussianPolicy& policy,
                      const std::vector<const hssm::SkillAnnotation*>& annotations,
                      const std::vector<env::StateActionView>& trajectories, const LossWeights& weights,
                      std::uint64_t seed) {
  if (annotations.size() != trajectories.size() || annotations.empty()) {
    throw DimensionError("vte_loss: annotation and trajectory counts differ");
  }
  if (!(weights.bc_alpha > 0.0) || !(weights.kld_alpha >= 0.0)) throw Error("vte_loss: weights must be positive");
  auto post = encoder.forward(g, annotations);
  num::Rng rng(seed);
  Tensor noise = rng.normal_tensor(annotations.size(), encoder.embedding_dim());
  VteLossTerms t;
  t.mu = post.mu;
  t.log_var = post.log_var;
  t.sample = post.mu + g.constant(noise) * num::exp(num::scale(post.log_var, 0.5));
  t.reconstruction = num::mean(batch_reconstruction(g, policy, trajectories, t.sample));
  t.kld = num::mean(kld_to_prior(post.mu, post.log_var));
  t.loss = num::scale(t.reconstruction, weights.bc_alpha) + num::scale(t.kld, weights.kld_alpha);
  if (!std::isfinite(t.loss.value().item())) throw NumericError("vte_loss", t.loss.id(), "non-finite loss");
  return t;
}

std::vector<std::uint64_t> trajectory_ids(const env::AbilityDataset& data) {
  std::vector<std::uint64_t> ids;
  for (const auto& tr : data.trajectories) ids.push_back(tr.id());
  return ids;
}

VteTrainResult train_vte(VteEncoder& encoder, SquashedGaussianPolicy& policy, const env::AbilityDataset& data,
                         const std::vector<hssm::SkillAnnotation>& annotations, const VteTrainConfig& cfg,
                         std::uint64_t seed) {
  const std::size_t n = data.trajectories.size();
  if (n == 0) throw Error("train_vte: empty dataset");
  if (annotations.size() != n) throw DimensionError("train_vte: one annotation per trajectory required");
  if (cfg.batch == 0) throw Error("train_vte: batch size must be positive");
  auto params = encoder.parameters();
  policy.collect(params);
  num::Adam opt({.lr = cfg.lr, .clip_norm = 100.0});
  num::Rng order(num::derive_seed(seed, 1));
  const auto ids = trajectory_ids(data);

  VteTrainResult result;
  std::vector<std::vector<TrajectoryEmbedding>> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = order.permutation(n);
    double loss_sum = 0.0, recon_sum = 0.0, kld_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      std::vector<const hssm::SkillAnnotation*> anns;
      std::vector<env::StateActionView> views;
      for (std::size_t i = start; i < std::min(n, start + cfg.batch); ++i) {
        anns.push_back(&annotations[perm[i]]);
        views.push_back(data.trajectories[perm[i]].view());
      }
      num::zero_grads(params);
      Graph g;
      auto terms = vte_loss(g, encoder, policy, anns, views, cfg.weights, num::derive_seed(seed, 2 + epoch, batches));
      const double loss = terms.loss.value().item();
      if (std::abs(loss) > cfg.divergence_limit) {
        throw DivergenceError("vte training diverged at epoch " + std::to_string(epoch) + " (loss " +
                              std::to_string(loss) + ")");
      }
      g.backward(terms.loss);
      opt.step(params);
      loss_sum += loss;
      recon_sum += terms.reconstruction.value().item();
      kld_sum += terms.kld.value().item();
      ++batches;
    }
    history.push_back(encode_all(encoder, annotations, ids, seed));
    VteEpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(batches);
    entry.reconstruction = recon_sum / static_cast<double>(batches);
    entry.kld = kld_sum / static_cast<double>(batches);
    entry.drift = std::numeric_limits<double>::quiet_NaN();
    if (history.size() > cfg.early_stop_window) {
      const auto& now = history.back();
      const auto& then = history[history.size() - 1 - cfg.early_stop_window];
      double drift = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double worst = 0.0;
        for (std::size_t k = 0; k < now[i].mu.size(); ++k) worst = std::max(worst, std::abs(now[i].mu[k] - then[i].mu[k]));
        drift += worst;
      }
      entry.drift = drift / static_cast<double>(n);
    }
    result.log.push_back(entry);
    if (cfg.on_epoch) cfg.on_epoch(entry);
    log::info("vte epoch " + std::to_string(epoch) + " loss " + std::to_string(entry.loss) + " recon " +
              std::to_string(entry.reconstruction) + " kld " + std::to_string(entry.kld) + " drift " +
              std::to_string(entry.drift));
    if (entry.drift < cfg.early_stop_eps) break;
  }
  result.embeddings = history.back();
  return result;
}

VteTrainResult train_vte(VteEncoder& encoder, SquashedGaussianPolicy& policy, const env::AbilityDataset& data,
                         hssm::HssmModel& skills, const VteTrainConfig& config, std::uint64_t seed) {
  return train_vte(encoder, policy, data, hssm::se_logit_all(skills, data), config, seed);
}

std::string embedding_csv(const std::vector<TrajectoryEmbedding>& embeddings, const env::AbilityDataset& data) {
  if (embeddings.size() != data.trajectories.size()) throw DimensionError("embedding_csv: count mismatch");
  std::ostringstream out;
  out.precision(17);
  const std::size_t d = embeddings.empty() ? 0 : embeddings[0].mu.size();
  out << "trajId,ability";
  for (std::size_t k = 0; k < d; ++k) out << ",mu_" << k;
  for (std::size_t k = 0; k < d; ++k) out << ",sigma_" << k;
  out << '\n';
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    out << embeddings[i].traj_id << ',' << data.trajectories[i].eval_labels().ability;
    for (double v : embeddings[i].mu) out << ',' << v;
    for (double v : embeddings[i].sigma) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace traj::vte
