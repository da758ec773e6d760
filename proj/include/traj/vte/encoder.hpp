#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "traj/hssm/skills.hpp"
#include "traj/num/checkpoint.hpp"
#include "traj/num/nn.hpp"

namespace traj::vte {

struct VteConfig {
  std::size_t annotation_width = 32;  // per-annotation MLP output; transformer input is twice this
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t max_length = 128;
  std::size_t embedding_dim = 10;
  std::vector<std::size_t> policy_hidden = {64, 64};
};

struct TrajectoryEmbedding {
  std::uint64_t traj_id = 0;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> sample;  // mu + sigma * noise
  std::vector<double> noise;
};

// Skill annotations -> per-step MLPs -> concat -> transformer -> mean over
// time -> Gaussian posterior heads. Heads start at zero, so an untrained
// encoder outputs the prior.
class VteEncoder {
 public:
  VteEncoder() = default;
  VteEncoder(const VteConfig& config, std::size_t skills, num::Rng& rng);

  struct Posterior {
    num::Var mu;       // B x d
    num::Var log_var;  // B x d
  };
  // All annotations must share their length.
  Posterior forward(num::Graph& g, const std::vector<const hssm::SkillAnnotation*>& batch);

  std::size_t skills() const { return skills_; }
  std::size_t embedding_dim() const { return config_.embedding_dim; }
  const VteConfig& config() const { return config_; }

  void collect(std::vector<num::Parameter*>& out);
  std::vector<num::Parameter*> parameters();
  void store(num::TensorMap& map, const std::string& prefix = "vte/encoder/");
  void load(const num::TensorMap& map, const std::string& prefix = "vte/encoder/");

  num::Mlp skill_mlp;
  num::Mlp boundary_mlp;
  num::SequenceEncoder transformer;
  num::Linear mu_head;
  num::Linear log_var_head;

 private:
  VteConfig config_;
  std::size_t skills_ = 0;
};

TrajectoryEmbedding encode(VteEncoder& encoder, const hssm::SkillAnnotation& annotation, std::uint64_t seed);

// Posterior means and scales for many annotations, batched by equal length;
// samples use derive_seed(seed, index).
std::vector<TrajectoryEmbedding> encode_all(VteEncoder& encoder, const std::vector<hssm::SkillAnnotation>& annotations,
                                            const std::vector<std::uint64_t>& ids, std::uint64_t seed);

// Time average of the skill logits; the order-blind baseline.
std::vector<double> mean_pool_embed(const hssm::SkillAnnotation& annotation);

// 0.5 * sum(sigma^2 + mu^2 - 1 - log sigma^2) per row (B x 1).
num::Var kld_to_prior(num::Var mu, num::Var log_var);
double kld_to_prior(std::span<const double> mu, std::span<const double> sigma);

}  // namespace traj::vte
