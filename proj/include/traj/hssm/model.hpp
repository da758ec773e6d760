#pragma once

#include <vector>

#include "traj/env/trajectory.hpp"
#include "traj/num/checkpoint.hpp"
#include "traj/num/nn.hpp"

namespace traj::hssm {

struct HssmConfig {
  std::size_t skills = 8;
  std::size_t abstraction = 16;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t max_length = 128;
  std::size_t decoder_hidden = 32;
};

// Convention: m_t = 1 starts a new skill at step t (m_1 = 1 always); with
// m_t = 0 both prior and posterior copy z_{t-1}. The abstraction
// s_t = tanh(x_t W + b + E[z_t]) is deterministic and shared by prior and
// posterior.
struct HssmModel {
  HssmModel() = default;
  HssmModel(const HssmConfig& config, std::size_t state_dim, std::size_t action_dim, num::Rng& rng);

  void collect(std::vector<num::Parameter*>& out);
  std::vector<num::Parameter*> parameters();
  void store(num::TensorMap& map, const std::string& prefix = "hssm/");
  void load(const num::TensorMap& map, const std::string& prefix = "hssm/");

  HssmConfig config;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  // q(m_t | x_{1:t}): causal encoder over (x_t, x_t - x_{t-1}).
  num::SequenceEncoder boundary_encoder;
  num::Linear boundary_head;
  // q(z_t | z_{t-1}, m_t = 1, x_{1:T}, a_{1:T}): bidirectional encoder over (x_t, a_t).
  num::SequenceEncoder skill_encoder;
  num::Linear skill_head;
  num::Parameter skill_start;     // 1 x l, logits offset at t = 1
  num::Parameter skill_coupling;  // l x l, row j added when z_{t-1} = j
  // p(z_t | x_t, z_{t-1}, m_t = 1)
  num::Linear prior_state;
  num::Parameter prior_start;
  num::Parameter prior_coupling;
  // s_t and p(m_t | s_{t-1})
  num::Linear abstraction;
  num::Parameter skill_embedding;  // l x abstraction
  num::Linear boundary_prior;
  // p(a_t | s_t): Gaussian with mean and bounded log-std
  num::Mlp decoder;
  // p_z over skills, as logits
  num::Parameter skill_prior_logits;
};

// Per-step conditional tables for a batch of B equal-length trajectories.
// Step t (0-based) entries:
//   qm_logit[t]  B x 1    posterior boundary logit (unused at t = 0)
//   log_qnew[t]  B x l at t = 0, (B*l) x l after: row b*l + j is
//                log q(z_t | z_{t-1} = j, m_t = 1)
//   log_pnew[t]  same layout for the prior
//   pm_logit[t]  B x l    prior boundary logit given z_{t-1} = j (unused at t = 0)
//   loga[t]      B x l    log p(a_t | s_t(z_t = j))
struct ElboTables {
  std::size_t batch = 0;
  std::size_t skills = 0;
  std::size_t length = 0;
  std::vector<num::Var> qm_logit, log_qnew, log_pnew, pm_logit, loga;
  num::Var log_skill_prior;  // 1 x l
};

ElboTables build_tables(num::Graph& g, HssmModel& model, const std::vector<env::StateActionView>& batch);

}  // namespace traj::hssm
