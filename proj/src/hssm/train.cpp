#include "traj/hssm/train.hpp"

#include <cmath>
#include <sstream>

#include "traj/error.hpp"
#include "traj/hssm/elbo.hpp"
#include "traj/hssm/skills.hpp"
#include "traj/log.hpp"
#include "traj/num/adam.hpp"

namespace traj::hssm {

HssmTrainResult train_hssm(HssmModel& model, const env::AbilityDataset& data, const HssmTrainConfig& cfg,
                           std::uint64_t seed) {
  const std::size_t n = data.trajectories.size();
  if (n == 0) throw Error("train_hssm: empty dataset");
  if (cfg.batch == 0) throw Error("train_hssm: batch size must be positive");
  auto params = model.parameters();
  num::Adam opt({.lr = cfg.lr, .clip_norm = 100.0});
  num::Rng order_rng(num::derive_seed(seed, 1));

  HssmTrainResult result;
  double lambda = cfg.lambda_init;
  const bool fixed_constraint = !std::isnan(cfg.constraint_override);
  double constraint = fixed_constraint ? cfg.constraint_override : std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double frac = cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 1.0;
    const double tau = cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, frac);
    const bool warmup = epoch < cfg.warmup_epochs && !fixed_constraint;
    const auto perm = order_rng.permutation(n);
    double loss_sum = 0.0, info_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      std::vector<env::StateActionView> views;
      for (std::size_t i = start; i < std::min(n, start + cfg.batch); ++i) views.push_back(data.trajectories[perm[i]].view());
      num::zero_grads(params);
      num::Graph g;
      ElboTerms terms = hssm_elbo(g, model, views, tau, num::derive_seed(seed, 2 + epoch, batches));
      const double loss = terms.loss.value().item();
      if (!std::isfinite(loss) || std::abs(loss) > cfg.divergence_limit) {
        throw DivergenceError("hssm training diverged at epoch " + std::to_string(epoch) + " (loss " +
                              std::to_string(loss) + ")");
      }
      const double info = terms.info_cost.value().item();
      num::Var objective;
      if (warmup) {
        objective = terms.loss;
      } else if (std::isinf(constraint)) {
        objective = terms.info_cost;
      } else {
        objective = terms.info_cost + num::scale(num::add_scalar(terms.loss, -constraint), lambda);
      }
      g.backward(objective);
      opt.step(params);
      if (!warmup && !cfg.freeze_lambda && std::isfinite(constraint)) {
        lambda = std::max(0.0, lambda + cfg.dual_step * (loss - constraint));
      }
      loss_sum += loss;
      info_sum += info;
      ++batches;
    }
    const double mean_loss = loss_sum / static_cast<double>(batches);
    if (warmup && epoch + 1 == cfg.warmup_epochs) {
      constraint = mean_loss + cfg.constraint_slack * std::abs(mean_loss);
      result.constraint = constraint;
    }
    HssmEpochLog entry;
    entry.epoch = epoch;
    entry.elbo = -mean_loss;
    entry.info_cost = info_sum / static_cast<double>(batches);
    entry.lambda = warmup ? 0.0 : lambda;
    entry.cluster_error = clustering_error(model, data, num::derive_seed(seed, 3));
    result.log.push_back(entry);
    if (cfg.on_epoch) cfg.on_epoch(entry);
    log::info("hssm epoch " + std::to_string(epoch) + " elbo " + std::to_string(entry.elbo) + " infocost " +
              std::to_string(entry.info_cost) + " lambda " + std::to_string(entry.lambda) + " cluster_err " +
              std::to_string(entry.cluster_error));
    if (cfg.early_stop && !warmup && entry.cluster_error < cfg.early_stop_error) break;
  }
  if (fixed_constraint) result.constraint = constraint;
  return result;
}

std::string training_log_csv(const std::vector<HssmEpochLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,elbo,infocost,lambda,cluster_err\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.elbo << ',' << e.info_cost << ',' << e.lambda << ',' << e.cluster_error << '\n';
  }
  return out.str();
}

}  // namespace traj::hssm
