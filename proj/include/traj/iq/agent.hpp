#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "traj/env/env.hpp"
#include "traj/num/adam.hpp"
#include "traj/num/checkpoint.hpp"
#include "traj/num/nn.hpp"
#include "traj/vte/policy.hpp"

namespace traj::iq {

struct AgentConfig {
  std::vector<std::size_t> actor_hidden = {64, 64};
  std::vector<std::size_t> critic_hidden = {64, 64};
  double temperature = 1e-12;  // entropy scale, fixed
  double gamma = 0.99;
};

// Embedding-conditioned actor pi(a | x, e) and critic Q(x, a | e), with a
// target copy of the critic that only moves by exponential averaging.
class ConditionalAgent {
 public:
  ConditionalAgent() = default;
  ConditionalAgent(const env::EnvSpec& spec, std::size_t embedding_dim, const AgentConfig& config, num::Rng& rng);

  std::size_t state_dim() const { return actor.state_dim(); }
  std::size_t action_dim() const { return actor.action_dim(); }
  std::size_t embedding_dim() const { return actor.cond_dim(); }

  // N x 1. The target critic is bound as constants.
  num::Var q_value(num::Graph& g, num::Var states, num::Var actions, num::Var cond, bool target = false);

  // target <- rho * target + (1 - rho) * critic
  void update_target(double rho);

  std::vector<num::Parameter*> critic_parameters();
  std::vector<num::Parameter*> target_parameters();
  std::vector<num::Parameter*> actor_parameters() { return actor.parameters(); }

  // Sections condiq/actor/*, condiq/critic/* and condiq/critic/target/*.
  void store(num::TensorMap& map);
  void load(const num::TensorMap& map);

  vte::SquashedGaussianPolicy actor;
  num::Mlp critic;
  num::Mlp target_critic;
  double temperature = 1e-12;
  double gamma = 0.99;
};

struct TransitionBatch {
  num::Tensor states;       // N x state_dim
  num::Tensor actions;      // N x action_dim
  num::Tensor next_states;  // N x state_dim
  num::Tensor not_done;     // N x 1, 0 on terminal transitions
  num::Tensor cond;         // N x embedding_dim

  std::size_t size() const { return states.rows(); }
};

struct Transition {
  std::vector<double> state, action, next_state;
  bool done = false;
  std::vector<double> cond;
};

// Bounded FIFO of transitions, each tagged with its conditioning embedding.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }

  // Uniform with replacement.
  TransitionBatch sample(std::size_t n, num::Rng& rng) const;
  TransitionBatch gather(const std::vector<std::size_t>& index) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

// Soft value E_{a~pi}[Q(x, a | e) - temperature * log pi(a | x, e)] by Monte
// Carlo, N x 1. Gradients reach the critic only; actor samples are constants.
num::Var soft_value(num::Graph& g, ConditionalAgent& agent, const num::Tensor& states, const num::Tensor& cond,
                    std::size_t samples, num::Rng& rng, bool target = false);

double v_pi(ConditionalAgent& agent, std::span<const double> state, std::span<const double> cond, std::size_t samples,
            std::uint64_t seed);

enum class FKind { Identity, Chi2 };

struct FSpec {
  FKind kind = FKind::Chi2;
  double alpha = 0.5;  // chi2 only: f(x) = x - x^2 / (4 alpha)
};

FSpec parse_f(const std::string& text);
std::string to_string(const FSpec& f);
num::Var apply_f(num::Var x, const FSpec& f);

// sum_i w_i (V(s_i) - gamma * not_done_i * V(s'_i)); equals
// (1 - gamma) E_{s0}[V(s0)] when w is a normalized discounted occupancy.
num::Var telescoped_value(num::Var v, num::Var v_next, const num::Tensor& not_done, const num::Tensor& weights,
                          double gamma);

enum class InitialEstimate { Starts, PolicyTelescoped, MixedTelescoped };

struct IqLossOptions {
  FSpec f;
  std::size_t value_samples = 1;
  // Next-state values from the target critic.
  bool target_next = true;
  // How (1 - gamma) E[V(s0)] is estimated: from trajectory starts, or by
  // telescoping over the policy batch or over expert and policy batches.
  InitialEstimate initial = InitialEstimate::Starts;
  // Add the chi2 penalty (Q - gamma V(s'))^2 / (4 alpha) on policy samples
  // too, which keeps Q bounded off the expert support.
  bool regularize_policy = false;
};

struct IqLossTerms {
  num::Var loss;           // -J
  num::Var expert_term;    // E_expert[f(Q - gamma V(s'))]
  num::Var initial_term;   // (1 - gamma) E[V(s0)]
  num::Var policy_penalty;  // set when regularize_policy
};

// initial holds (state, cond) rows of trajectory starts; only its states and
// cond fields are read.
IqLossTerms iq_loss(num::Graph& g, ConditionalAgent& agent, const TransitionBatch& expert,
                    const TransitionBatch& initial, const TransitionBatch& policy, const IqLossOptions& options,
                    num::Rng& rng);

// Reparameterized E[Q(x, a | e) - temperature * log pi(a | x, e)] over the
// batch states; returns the objective before the step.
double sac_actor_update(ConditionalAgent& agent, num::Adam& optimizer, const num::Tensor& states,
                        const num::Tensor& cond, num::Rng& rng);
num::Var actor_objective(num::Graph& g, ConditionalAgent& agent, const num::Tensor& states, const num::Tensor& cond,
                         const num::Tensor& noise);

}  // namespace traj::iq
