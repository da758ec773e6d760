#include "traj/iq/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "traj/error.hpp"
#include "traj/log.hpp"
#include "traj/num/adam.hpp"

namespace traj::iq {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

const std::vector<double>& lookup(const EmbeddingTable& table, std::uint64_t id) {
  auto it = table.find(id);
  if (it == table.end()) throw MissingArtifactError("embedding table has no entry for trajectory " + std::to_string(id));
  return it->second;
}

ReturnStats summarize(std::vector<double> returns) {
  ReturnStats s;
  for (double r : returns) s.mean += r;
  s.mean /= static_cast<double>(returns.size());
  for (double r : returns) s.std += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(returns.size()));
  s.returns = std::move(returns);
  return s;
}

void check_env(const env::Env& env, std::size_t state_dim, std::size_t action_dim) {
  if (env.spec().state_dim != state_dim || env.spec().action_dim != action_dim) {
    throw DimensionError("environment and agent dimensions differ: env " + std::to_string(env.spec().state_dim) + "/" +
                         std::to_string(env.spec().action_dim) + ", agent " + std::to_string(state_dim) + "/" +
                         std::to_string(action_dim));
  }
}

std::vector<double> average_embedding(const std::vector<const std::vector<double>*>& rows) {
  std::vector<double> out(rows.front()->size(), 0.0);
  for (const auto* r : rows) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (*r)[k];
  }
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

}  // namespace

std::vector<env::Rollout> mean_action_rollouts(vte::SquashedGaussianPolicy& policy, const env::Env& env,
                                               std::span<const double> cond, std::size_t rollouts,
                                               std::uint64_t seed) {
  if (rollouts == 0) throw Error("eval: need at least one rollout");
  check_env(env, policy.state_dim(), policy.action_dim());
  if (policy.cond_dim() != 0 && cond.size() != policy.cond_dim()) {
    throw DimensionError("eval: embedding width does not match the policy");
  }
  const std::size_t sd = policy.state_dim(), ad = policy.action_dim(), cd = policy.cond_dim();
  const std::size_t T = env.spec().horizon;
  num::Rng rng(seed);
  std::vector<env::Rollout> out(rollouts);
  Tensor states = Tensor::zeros(rollouts, sd);
  for (std::size_t r = 0; r < rollouts; ++r) {
    const auto x0 = env.initial_state(rng);
    std::copy(x0.begin(), x0.end(), states.row_span(r).begin());
    out[r].states = Tensor::zeros(T, sd);
    out[r].actions = Tensor::zeros(T, ad);
  }
  Tensor conds = cd == 0 ? Tensor() : Tensor::zeros(rollouts, cd);
  for (std::size_t r = 0; cd != 0 && r < rollouts; ++r) std::copy(cond.begin(), cond.end(), conds.row_span(r).begin());
  // All rollouts advance in lockstep so the actor runs once per step.
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor actions = policy.mean_actions(states, conds);
    for (std::size_t r = 0; r < rollouts; ++r) {
      const auto step = env.step(states.row_span(r), actions.row_span(r));
      auto& ro = out[r];
      std::copy(states.row_span(r).begin(), states.row_span(r).end(), ro.states.row_span(t).begin());
      std::copy(step.action.begin(), step.action.end(), ro.actions.row_span(t).begin());
      ro.rewards.push_back(step.reward);
      ro.total_return += step.reward;
      if (step.phase_switch) ro.switch_steps.push_back(t);
      std::copy(step.next_state.begin(), step.next_state.end(), states.row_span(r).begin());
    }
  }
  return out;
}

ReturnStats eval_policy(vte::SquashedGaussianPolicy& policy, const env::Env& env, std::span<const double> cond,
                        std::size_t rollouts, std::uint64_t seed) {
  std::vector<double> returns;
  for (const auto& r : mean_action_rollouts(policy, env, cond, rollouts, seed)) returns.push_back(r.total_return);
  return summarize(std::move(returns));
}

ReturnStats eval_conditioned(ConditionalAgent& agent, const env::Env& env, std::span<const double> embedding,
                             std::size_t rollouts, std::uint64_t seed) {
  if (embedding.size() != agent.embedding_dim()) throw DimensionError("eval: embedding width does not match the agent");
  return eval_policy(agent.actor, env, embedding, rollouts, seed);
}

double relative_l2_error(std::span<const double> learned, std::span<const double> target) {
  if (learned.size() != target.size() || learned.empty()) {
    throw DimensionError("relative_l2_error: lists must be non-empty and of equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < learned.size(); ++i) {
    if (target[i] == 0.0) throw Error("relative_l2_error: zero target at index " + std::to_string(i));
    total += std::abs(learned[i] - target[i]) / std::abs(target[i]);
  }
  return 100.0 * total / static_cast<double>(learned.size());
}

std::vector<EvalRow> evaluate_levels(ConditionalAgent& agent, const env::Env& env, const env::AbilityDataset& data,
                                     const EmbeddingTable& table, const EvalPlan& plan, std::size_t step,
                                     std::uint64_t seed) {
  if (plan.sources_per_level == 0) throw Error("evaluate_levels: need at least one source per level");
  const auto stats = data.level_stats();
  std::vector<EvalRow> rows;
  for (int level = 1; level <= data.levels; ++level) {
    std::vector<const env::Trajectory*> members;
    for (const auto& t : data.trajectories) {
      if (t.eval_labels().ability == level) members.push_back(&t);
    }
    if (members.empty()) throw Error("evaluate_levels: level " + std::to_string(level) + " has no trajectories");
    const double target = stats[static_cast<std::size_t>(level - 1)].mean;
    auto emit = [&](std::uint64_t source, const std::vector<double>& e) {
      const auto r = eval_conditioned(agent, env, e, plan.rollouts, num::derive_seed(seed, static_cast<std::uint64_t>(level)));
      const double learned = r.mean;
      rows.push_back({step, level, source, r.mean, r.std, relative_l2_error({&learned, 1}, {&target, 1})});
    };
    if (plan.level_centroid) {
      std::vector<const std::vector<double>*> all;
      for (const auto* t : members) all.push_back(&lookup(table, t->id()));
      emit(0, average_embedding(all));
      continue;
    }
    const std::size_t k = std::min(plan.sources_per_level, members.size());
    for (std::size_t i = 0; i < k; ++i) {
      const auto* t = members[i * members.size() / k];
      emit(t->id(), lookup(table, t->id()));
    }
  }
  return rows;
}

std::vector<double> level_means(const std::vector<EvalRow>& rows, int levels) {
  std::vector<double> sum(static_cast<std::size_t>(levels), 0.0), count(static_cast<std::size_t>(levels), 0.0);
  for (const auto& r : rows) {
    if (r.level < 1 || r.level > levels) throw Error("level_means: row level out of range");
    sum[static_cast<std::size_t>(r.level - 1)] += r.mean_return;
    count[static_cast<std::size_t>(r.level - 1)] += 1.0;
  }
  for (std::size_t l = 0; l < sum.size(); ++l) {
    if (count[l] == 0.0) throw Error("level_means: no rows for level " + std::to_string(l + 1));
    sum[l] /= count[l];
  }
  return sum;
}

IqTrainResult train_cond_iq(ConditionalAgent& agent, const env::AbilityDataset& data, const EmbeddingTable& table,
                            const env::Env& env, const IqTrainConfig& cfg, std::uint64_t seed) {
  check_env(env, agent.state_dim(), agent.action_dim());
  if (data.trajectories.empty()) throw Error("train_cond_iq: empty dataset");
  if (cfg.batch == 0 || cfg.env_steps_per_update == 0 || cfg.eval_interval == 0) {
    throw Error("train_cond_iq: batch, update ratio and eval interval must be positive");
  }
  const std::size_t sd = agent.state_dim();

  ReplayBuffer expert(std::max<std::size_t>(1, data.trajectories.size() * data.spec.horizon));
  ReplayBuffer starts(data.trajectories.size());
  for (const auto& t : data.trajectories) {
    const auto& e = lookup(table, t.id());
    if (e.size() != agent.embedding_dim()) throw DimensionError("train_cond_iq: embedding width does not match agent");
    const auto view = t.view();
    for (std::size_t i = 0; i + 1 < view.length(); ++i) {
      expert.push({view.states().row_vector(i), view.actions().row_vector(i), view.states().row_vector(i + 1), false,
                   e});
    }
    starts.push({view.states().row_vector(0), view.actions().row_vector(0), view.states().row_vector(0), false, e});
  }
  if (expert.size() == 0) throw Error("train_cond_iq: trajectories too short for transitions");

  num::Rng rng(num::derive_seed(seed, 1));
  num::Rng env_rng(num::derive_seed(seed, 2));
  num::Adam critic_opt({.lr = cfg.critic_lr});
  num::Adam actor_opt({.lr = cfg.actor_lr});
  ReplayBuffer policy(cfg.buffer_capacity);
  const auto critic_params = agent.critic_parameters();

  std::vector<std::size_t> order = rng.permutation(data.trajectories.size());
  std::size_t cursor = 0;
  std::vector<double> cond;
  std::vector<double> state;
  std::size_t t_in_episode = 0;
  auto reset = [&] {
    if (cursor == order.size()) {
      order = rng.permutation(data.trajectories.size());
      cursor = 0;
    }
    cond = lookup(table, data.trajectories[order[cursor++]].id());
    state = env.initial_state(env_rng);
    t_in_episode = 0;
  };
  reset();

  IqTrainResult result;
  for (std::size_t step = 1; step <= cfg.env_steps; ++step) {
    {
      Graph g(false);
      const Tensor s({1, sd}, state);
      const Tensor c({1, cond.size()}, cond);
      auto draw = agent.actor.rsample(g, g.constant(s), g.constant(c), env_rng.normal_tensor(1, agent.action_dim()));
      const auto out = env.step(state, draw.action.value().row_span(0));
      policy.push({state, out.action, out.next_state, false, cond});
      state = out.next_state;
      if (++t_in_episode == env.spec().horizon) reset();
    }

    if (step > cfg.start_steps && step % cfg.env_steps_per_update == 0 && policy.size() >= cfg.batch) {
      const auto expert_batch = expert.sample(cfg.batch, rng);
      const auto start_batch = starts.sample(cfg.batch, rng);
      const auto policy_batch = policy.sample(cfg.batch, rng);

      num::zero_grads(critic_params);
      Graph g;
      auto terms = iq_loss(g, agent, expert_batch, start_batch, policy_batch, cfg.loss, rng);
      g.backward(terms.loss);
      critic_opt.step(critic_params);

      if (cfg.actor_on_expert_states) {
        Graph stack(false);
        const Tensor s = num::concat_rows({stack.constant(policy_batch.states), stack.constant(expert_batch.states)}).value();
        const Tensor c = num::concat_rows({stack.constant(policy_batch.cond), stack.constant(expert_batch.cond)}).value();
        sac_actor_update(agent, actor_opt, s, c, rng);
      } else {
        sac_actor_update(agent, actor_opt, policy_batch.states, policy_batch.cond, rng);
      }
      agent.update_target(cfg.target_rho);
      ++result.updates;
    }

    if (step % cfg.eval_interval == 0 || step == cfg.env_steps) {
      auto rows = evaluate_levels(agent, env, data, table, cfg.eval, step, num::derive_seed(seed, 3));
      if (log::level() >= log::Level::Info) {
        const auto means = level_means(rows, data.levels);
        std::ostringstream msg;
        msg << "iq step " << step << " level returns";
        for (double m : means) msg << ' ' << m;
        log::info(msg.str());
      }
      if (cfg.on_eval) cfg.on_eval(rows);
      result.log.insert(result.log.end(), rows.begin(), rows.end());
    }
  }
  return result;
}

std::string eval_log_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "step,level,e_source_trajId,mean_return,std,relative_l2\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.level << ',' << r.source_id << ',' << r.mean_return << ',' << r.std << ','
        << r.relative_l2 << '\n';
  }
  return out.str();
}

vte::SquashedGaussianPolicy train_bc_baseline(const env::AbilityDataset& data, const BcConfig& cfg,
                                              std::uint64_t seed) {
  if (data.trajectories.empty()) throw Error("train_bc_baseline: empty dataset");
  num::Rng rng(seed);
  vte::SquashedGaussianPolicy policy("bc", data.spec.state_dim, 0, data.spec.action_low, data.spec.action_high,
                                     cfg.hidden, rng);
  std::size_t rows = 0;
  for (const auto& t : data.trajectories) rows += t.length();
  Tensor states = Tensor::zeros(rows, data.spec.state_dim), actions = Tensor::zeros(rows, data.spec.action_dim);
  std::size_t r = 0;
  for (const auto& t : data.trajectories) {
    const auto view = t.view();
    for (std::size_t i = 0; i < view.length(); ++i, ++r) {
      std::copy(view.states().row_span(i).begin(), view.states().row_span(i).end(), states.row_span(r).begin());
      std::copy(view.actions().row_span(i).begin(), view.actions().row_span(i).end(), actions.row_span(r).begin());
    }
  }
  num::Adam opt({.lr = cfg.lr});
  const auto params = policy.parameters();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = rng.permutation(rows);
    for (std::size_t lo = 0; lo < rows; lo += cfg.batch) {
      const std::size_t hi = std::min(rows, lo + cfg.batch);
      std::vector<std::size_t> index(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                     perm.begin() + static_cast<std::ptrdiff_t>(hi));
      num::zero_grads(params);
      Graph g;
      Var s = num::gather_rows(g.constant(states), index);
      Tensor a = num::gather_rows(g.constant(actions), index).value();
      Var nll = num::neg(num::mean(policy.log_prob(g, s, Var(), a)));
      if (!std::isfinite(nll.value().item())) throw NumericError("train_bc_baseline", nll.id(), "non-finite loss");
      g.backward(nll);
      opt.step(params);
    }
  }
  return policy;
}

}  // namespace traj::iq
