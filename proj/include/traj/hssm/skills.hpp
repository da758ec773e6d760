#pragma once

#include <cstdint>
#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/hssm/model.hpp"

namespace traj::hssm {

struct SkillAnnotation {
  num::Tensor z_logits;  // T x l, log posterior skill marginals
  num::Tensor m_logits;  // T x 2, [log q(m_t = 0), log q(m_t = 1)]
};

// Deterministic: expected boundaries with soft skill carry-over.
SkillAnnotation se_logit(HssmModel& model, const env::StateActionView& traj);
std::vector<SkillAnnotation> se_logit_all(HssmModel& model, const env::AbilityDataset& data);

struct SkillSample {
  std::vector<std::size_t> skills;
  std::vector<int> boundaries;
};

// Ancestral sample from the posterior.
SkillSample se_sample(HssmModel& model, const env::StateActionView& traj, std::uint64_t seed);

// Fraction of reference switch steps with a predicted boundary (argmax of the
// m logits, t >= 1) within `tolerance` steps. 1 when there are no switches.
double boundary_alignment(const SkillAnnotation& a, const std::vector<std::size_t>& switches, std::size_t tolerance);

// Row mean of the z logits.
std::vector<double> mean_pool(const SkillAnnotation& a);

// 1 - Hungarian-matched accuracy of k-means (k = levels) on mean-pooled z
// logits. Reads ability tags through the evaluation accessor.
double clustering_error(HssmModel& model, const env::AbilityDataset& data, std::uint64_t seed);
double clustering_error(const std::vector<SkillAnnotation>& annotations, const env::AbilityDataset& data,
                        std::uint64_t seed);

}  // namespace traj::hssm
