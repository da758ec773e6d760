#include "traj/iq/agent.hpp"

#include <cmath>
#include <limits>

#include "traj/error.hpp"

namespace traj::iq {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

Tensor column(std::size_t n, double v) { return Tensor(std::vector<std::size_t>{n, 1}, v); }

void check_batch(const TransitionBatch& b, const ConditionalAgent& agent, const char* what, bool transitions) {
  const std::size_t n = b.states.rows();
  if (b.states.size() == 0 || n == 0) throw Error(std::string("iq_loss: empty ") + what + " batch");
  if (b.states.cols() != agent.state_dim() || b.cond.rows() != n || b.cond.cols() != agent.embedding_dim()) {
    throw DimensionError(std::string("iq_loss: ") + what + " batch does not match the agent");
  }
  if (transitions && (b.actions.rows() != n || b.actions.cols() != agent.action_dim() || b.next_states.rows() != n ||
                      b.not_done.rows() != n)) {
    throw DimensionError(std::string("iq_loss: ") + what + " transitions are incomplete");
  }
}

}  // namespace

ConditionalAgent::ConditionalAgent(const env::EnvSpec& spec, std::size_t embedding_dim, const AgentConfig& config,
                                   num::Rng& rng)
    : actor("actor", spec.state_dim, embedding_dim, spec.action_low, spec.action_high, config.actor_hidden, rng),
      critic("critic", layer_sizes(spec.state_dim + spec.action_dim + embedding_dim, config.critic_hidden),
             num::Activation::Relu, num::Activation::Identity, rng),
      target_critic(critic),
      temperature(config.temperature),
      gamma(config.gamma) {
  if (!(config.temperature >= 0.0)) throw Error("agent: temperature must be non-negative");
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) throw Error("agent: discount must lie in (0, 1)");
}

Var ConditionalAgent::q_value(Graph& g, Var states, Var actions, Var cond, bool target) {
  if (states.cols() != state_dim() || actions.cols() != action_dim() || cond.cols() != embedding_dim()) {
    throw DimensionError("agent: critic input widths do not match");
  }
  if (!target) return critic(g, num::concat_cols({states, actions, cond}));
  Graph frozen(false);
  Var q = target_critic(frozen, frozen.constant(num::concat_cols({states, actions, cond}).value()));
  return g.constant(q.value());
}

void ConditionalAgent::update_target(double rho) {
  auto online = critic_parameters();
  auto target = target_parameters();
  for (std::size_t i = 0; i < online.size(); ++i) {
    auto t = target[i]->value.data();
    const auto c = online[i]->value.data();
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = rho * t[k] + (1.0 - rho) * c[k];
  }
}

std::vector<num::Parameter*> ConditionalAgent::critic_parameters() {
  std::vector<num::Parameter*> out;
  critic.collect(out);
  return out;
}

std::vector<num::Parameter*> ConditionalAgent::target_parameters() {
  std::vector<num::Parameter*> out;
  target_critic.collect(out);
  return out;
}

void ConditionalAgent::store(num::TensorMap& map) {
  actor.store(map, "condiq/actor/");
  num::store_parameters(map, "condiq/critic/", critic_parameters());
  num::store_parameters(map, "condiq/critic/target/", target_parameters());
  map["condiq/meta"] = Tensor::row({temperature, gamma});
}

void ConditionalAgent::load(const num::TensorMap& map) {
  actor.load(map, "condiq/actor/");
  num::load_parameters(map, "condiq/critic/", critic_parameters());
  num::load_parameters(map, "condiq/critic/target/", target_parameters());
  auto it = map.find("condiq/meta");
  if (it == map.end()) throw MissingArtifactError("checkpoint lacks section 'condiq/meta'");
  temperature = it->second[0];
  gamma = it->second[1];
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) throw Error("replay buffer: zero capacity");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

TransitionBatch ReplayBuffer::gather(const std::vector<std::size_t>& index) const {
  if (items_.empty() || index.empty()) throw Error("replay buffer: nothing to sample");
  const auto& first = items_.front();
  const std::size_t n = index.size(), sd = first.state.size(), ad = first.action.size(), cd = first.cond.size();
  TransitionBatch b{Tensor::zeros(n, sd), Tensor::zeros(n, ad), Tensor::zeros(n, sd), Tensor::zeros(n, 1),
                    Tensor::zeros(n, cd)};
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = items_.at(index[r]);
    for (std::size_t k = 0; k < sd; ++k) {
      b.states(r, k) = t.state[k];
      b.next_states(r, k) = t.next_state[k];
    }
    for (std::size_t k = 0; k < ad; ++k) b.actions(r, k) = t.action[k];
    for (std::size_t k = 0; k < cd; ++k) b.cond(r, k) = t.cond[k];
    b.not_done(r, 0) = t.done ? 0.0 : 1.0;
  }
  return b;
}

TransitionBatch ReplayBuffer::sample(std::size_t n, num::Rng& rng) const {
  std::vector<std::size_t> index(n);
  for (auto& i : index) i = rng.index(items_.size());
  return gather(index);
}

Var soft_value(Graph& g, ConditionalAgent& agent, const Tensor& states, const Tensor& cond, std::size_t samples,
               num::Rng& rng, bool target) {
  if (samples == 0) throw Error("soft_value: need at least one sample");
  const std::size_t n = states.rows();
  Var total;
  for (std::size_t s = 0; s < samples; ++s) {
    Graph frozen(false);
    auto draw = agent.actor.rsample(frozen, frozen.constant(states), frozen.constant(cond),
                                    rng.normal_tensor(n, agent.action_dim()));
    Var q = agent.q_value(g, g.constant(states), g.constant(draw.action.value()), g.constant(cond), target);
    Var v = q - num::scale(g.constant(draw.log_prob.value()), agent.temperature);
    total = total.valid() ? total + v : v;
  }
  return samples == 1 ? total : num::scale(total, 1.0 / static_cast<double>(samples));
}

double v_pi(ConditionalAgent& agent, std::span<const double> state, std::span<const double> cond, std::size_t samples,
            std::uint64_t seed) {
  Graph g(false);
  num::Rng rng(seed);
  const Tensor s({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  const Tensor c({1, cond.size()}, std::vector<double>(cond.begin(), cond.end()));
  // One row per sample so the estimate is a single batched pass.
  Var v = soft_value(g, agent, num::repeat_rows(g.constant(s), samples).value(),
                     num::repeat_rows(g.constant(c), samples).value(), 1, rng);
  return num::mean(v).value().item();
}

FSpec parse_f(const std::string& text) {
  if (text == "identity") return {FKind::Identity, 0.0};
  if (text == "chi2") return {FKind::Chi2, 0.5};
  const std::string prefix = "chi2:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(text.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - prefix.size() || !(alpha > 0.0)) {
      throw Error("unknown f kind '" + text + "' (chi2 needs a positive alpha)");
    }
    return {FKind::Chi2, alpha};
  }
  throw Error("unknown f kind '" + text + "' (known: identity, chi2, chi2:<alpha>)");
}

std::string to_string(const FSpec& f) {
  if (f.kind == FKind::Identity) return "identity";
  return "chi2:" + std::to_string(f.alpha);
}

Var apply_f(Var x, const FSpec& f) {
  switch (f.kind) {
    case FKind::Identity:
      return x;
    case FKind::Chi2:
      if (!(f.alpha > 0.0)) throw Error("chi2 f needs a positive alpha");
      if (std::isinf(f.alpha)) return x;
      return x - num::scale(num::square(x), 1.0 / (4.0 * f.alpha));
  }
  throw Error("unknown f kind");
}

Var telescoped_value(Var v, Var v_next, const Tensor& not_done, const Tensor& weights, double gamma) {
  Graph& g = v.graph();
  if (v.rows() != v_next.rows() || v.rows() != not_done.rows() || v.rows() != weights.rows()) {
    throw DimensionError("telescoped_value: row counts differ");
  }
  Var diff = v - num::scale(v_next * g.constant(not_done), gamma);
  return num::sum(diff * g.constant(weights));
}

IqLossTerms iq_loss(Graph& g, ConditionalAgent& agent, const TransitionBatch& expert, const TransitionBatch& initial,
                    const TransitionBatch& policy, const IqLossOptions& options, num::Rng& rng) {
  check_batch(expert, agent, "expert", true);
  const double gamma = agent.gamma;

  Var q = agent.q_value(g, g.constant(expert.states), g.constant(expert.actions), g.constant(expert.cond));
  Var v_next =
      soft_value(g, agent, expert.next_states, expert.cond, options.value_samples, rng, options.target_next);
  Var residual = q - num::scale(v_next * g.constant(expert.not_done), gamma);
  IqLossTerms out;
  out.expert_term = num::mean(apply_f(residual, options.f));

  if (options.initial != InitialEstimate::Starts) {
    check_batch(policy, agent, "policy", true);
    std::vector<const TransitionBatch*> parts{&policy};
    if (options.initial == InitialEstimate::MixedTelescoped) parts.push_back(&expert);
    std::size_t m = 0;
    for (const auto* b : parts) m += b->size();
    for (const auto* b : parts) {
      Var v = soft_value(g, agent, b->states, b->cond, options.value_samples, rng);
      Var vn = soft_value(g, agent, b->next_states, b->cond, options.value_samples, rng, options.target_next);
      Var part = telescoped_value(v, vn, b->not_done, column(b->size(), 1.0 / static_cast<double>(m)), gamma);
      out.initial_term = out.initial_term.valid() ? out.initial_term + part : part;
    }
  } else {
    check_batch(initial, agent, "initial-state", false);
    Var v0 = soft_value(g, agent, initial.states, initial.cond, options.value_samples, rng);
    out.initial_term = num::scale(num::mean(v0), 1.0 - gamma);
  }
  out.loss = out.initial_term - out.expert_term;
  if (options.regularize_policy) {
    if (options.f.kind != FKind::Chi2) throw Error("iq_loss: the policy-sample penalty needs the chi2 f");
    check_batch(policy, agent, "policy", true);
    Var qp = agent.q_value(g, g.constant(policy.states), g.constant(policy.actions), g.constant(policy.cond));
    Var vp = soft_value(g, agent, policy.next_states, policy.cond, options.value_samples, rng, options.target_next);
    Var rp = qp - num::scale(vp * g.constant(policy.not_done), gamma);
    out.policy_penalty = num::scale(num::mean(num::square(rp)), 1.0 / (4.0 * options.f.alpha));
    out.loss = out.loss + out.policy_penalty;
  }
  if (!std::isfinite(out.loss.value().item())) throw NumericError("iq_loss", out.loss.id(), "non-finite loss");
  return out;
}

Var actor_objective(Graph& g, ConditionalAgent& agent, const Tensor& states, const Tensor& cond, const Tensor& noise) {
  auto draw = agent.actor.rsample(g, g.constant(states), g.constant(cond), noise);
  Var q = agent.q_value(g, g.constant(states), draw.action, g.constant(cond));
  return num::mean(q - num::scale(draw.log_prob, agent.temperature));
}

double sac_actor_update(ConditionalAgent& agent, num::Adam& optimizer, const Tensor& states, const Tensor& cond,
                        num::Rng& rng) {
  auto params = agent.actor_parameters();
  num::zero_grads(params);
  Graph g;
  Var objective = actor_objective(g, agent, states, cond, rng.normal_tensor(states.rows(), agent.action_dim()));
  const double value = objective.value().item();
  if (!std::isfinite(value)) throw NumericError("sac_actor_update", objective.id(), "non-finite objective");
  g.backward(num::neg(objective));
  optimizer.step(params);
  return value;
}

}  // namespace traj::iq
