#pragma once

#include <vector>

#include "traj/hssm/model.hpp"

namespace traj::hssm {

// All scalars are batch means. `loss` is the negated bound.
struct ElboTerms {
  num::Var elbo;
  num::Var loss;
  num::Var reconstruction;
  num::Var kl_boundary;
  num::Var kl_skill;
  num::Var info_cost;
  // Per-step latents: posterior skill marginals (or relaxed samples) B x l
  // and boundary probabilities (or relaxed samples) B x 1.
  std::vector<num::Var> skills;
  std::vector<num::Var> boundaries;
};

// Closed-form bound by a forward recursion over posterior marginals. Under q
// the boundary m_t does not depend on z_{t-1}, so every term is an
// expectation over (z_{t-1}, m_t, z_t) with known marginals.
ElboTerms exact_elbo(num::Graph& g, const ElboTables& tables);

// Single-sample estimator with Gumbel-softmax skills and binary-concrete
// boundaries at temperature tau. Children are conditioned on the relaxed
// parent by mixing the parent-indexed tables; KL terms are analytic given
// the sampled parent. As tau -> 0 it is an unbiased estimate of exact_elbo.
ElboTerms relaxed_elbo(num::Graph& g, const ElboTables& tables, double tau, num::Rng& rng);

// -sum_t m_t * sum_k z_t[k] log p_z[k], averaged over the batch. m: B x 1 per
// step, z: B x l per step, p_z: 1 x l probabilities (clamped at 1e-12).
num::Var info_cost(const std::vector<num::Var>& m, const std::vector<num::Var>& z, num::Var p_z);

// Convenience: build tables and evaluate. tau <= 0 selects the exact bound.
ElboTerms hssm_elbo(num::Graph& g, HssmModel& model, const std::vector<env::StateActionView>& batch, double tau,
                    std::uint64_t noise_seed);

}  // namespace traj::hssm
