#include "traj/vte/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "traj/error.hpp"
#include "traj/num/ops.hpp"

namespace traj::vte {

using num::Graph;
using num::Tensor;
using num::Var;

VteEncoder::VteEncoder(const VteConfig& c, std::size_t skills, num::Rng& rng)
    : skill_mlp("vte.skill_mlp", {skills, c.annotation_width, c.annotation_width}, num::Activation::Tanh,
                num::Activation::Tanh, rng),
      boundary_mlp("vte.boundary_mlp", {2, c.annotation_width, c.annotation_width}, num::Activation::Tanh,
                   num::Activation::Tanh, rng),
      transformer("vte.transformer", 2 * c.annotation_width, c.hidden, c.heads, c.blocks, c.max_length, rng),
      mu_head("vte.mu", c.hidden, c.embedding_dim, rng),
      log_var_head("vte.log_var", c.hidden, c.embedding_dim, rng),
      config_(c),
      skills_(skills) {
  if (c.embedding_dim == 0) throw Error("vte: embedding dimension must be positive");
  mu_head.zero();
  log_var_head.zero();
}

VteEncoder::Posterior VteEncoder::forward(Graph& g, const std::vector<const hssm::SkillAnnotation*>& batch) {
  if (batch.empty()) throw Error("vte: empty batch");
  const std::size_t B = batch.size(), T = batch[0]->z_logits.rows();
  if (T == 0) throw Error("vte: empty annotation");
  if (T > transformer.max_length()) {
    throw DimensionError("annotation length " + std::to_string(T) + " exceeds positional capacity " +
                         std::to_string(transformer.max_length()));
  }
  Tensor z = Tensor::zeros(B * T, skills_), m = Tensor::zeros(B * T, 2);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& a = *batch[b];
    if (a.z_logits.rows() != T || a.m_logits.rows() != T) {
      throw DimensionError("vte: annotations in a batch must share their length");
    }
    if (a.z_logits.cols() != skills_ || a.m_logits.cols() != 2) throw DimensionError("vte: annotation width mismatch");
    std::copy(a.z_logits.data().begin(), a.z_logits.data().end(), z.data().begin() + static_cast<std::ptrdiff_t>(b * T * skills_));
    std::copy(a.m_logits.data().begin(), a.m_logits.data().end(), m.data().begin() + static_cast<std::ptrdiff_t>(b * T * 2));
  }
  Var steps = num::concat_cols({skill_mlp(g, g.constant(z)), boundary_mlp(g, g.constant(m))});
  Var pooled = num::segment_mean(transformer(g, steps, B, T, false), T);
  return {mu_head(g, pooled), log_var_head(g, pooled)};
}

void VteEncoder::collect(std::vector<num::Parameter*>& out) {
  skill_mlp.collect(out);
  boundary_mlp.collect(out);
  transformer.collect(out);
  mu_head.collect(out);
  log_var_head.collect(out);
}

std::vector<num::Parameter*> VteEncoder::parameters() {
  std::vector<num::Parameter*> out;
  collect(out);
  return out;
}

void VteEncoder::store(num::TensorMap& map, const std::string& prefix) { num::store_parameters(map, prefix, parameters()); }

void VteEncoder::load(const num::TensorMap& map, const std::string& prefix) {
  num::load_parameters(map, prefix, parameters());
}

namespace {

TrajectoryEmbedding from_rows(const Tensor& mu, const Tensor& log_var, std::size_t row, std::uint64_t id,
                              std::uint64_t seed) {
  TrajectoryEmbedding e;
  e.traj_id = id;
  num::Rng rng(seed);
  for (std::size_t k = 0; k < mu.cols(); ++k) {
    e.mu.push_back(mu(row, k));
    e.sigma.push_back(std::exp(0.5 * log_var(row, k)));
    e.noise.push_back(rng.normal());
    e.sample.push_back(e.mu.back() + e.sigma.back() * e.noise.back());
  }
  return e;
}

}  // namespace

TrajectoryEmbedding encode(VteEncoder& encoder, const hssm::SkillAnnotation& annotation, std::uint64_t seed) {
  Graph g(false);
  auto post = encoder.forward(g, {&annotation});
  return from_rows(post.mu.value(), post.log_var.value(), 0, 0, seed);
}

std::vector<TrajectoryEmbedding> encode_all(VteEncoder& encoder, const std::vector<hssm::SkillAnnotation>& annotations,
                                            const std::vector<std::uint64_t>& ids, std::uint64_t seed) {
  if (ids.size() != annotations.size()) throw DimensionError("encode_all: id count mismatch");
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < annotations.size(); ++i) by_length[annotations[i].z_logits.rows()].push_back(i);
  std::vector<TrajectoryEmbedding> out(annotations.size());
  constexpr std::size_t chunk = 32;
  for (const auto& [length, members] : by_length) {
    for (std::size_t start = 0; start < members.size(); start += chunk) {
      std::vector<const hssm::SkillAnnotation*> batch;
      const std::size_t stop = std::min(members.size(), start + chunk);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&annotations[members[i]]);
      Graph g(false);
      auto post = encoder.forward(g, batch);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = members[i];
        out[idx] = from_rows(post.mu.value(), post.log_var.value(), i - start, ids[idx], num::derive_seed(seed, idx));
      }
    }
  }
  return out;
}

std::vector<double> mean_pool_embed(const hssm::SkillAnnotation& annotation) { return hssm::mean_pool(annotation); }

Var kld_to_prior(Var mu, Var log_var) {
  return num::scale(num::sum_cols(num::add_scalar(num::exp(log_var) + num::square(mu) - log_var, -1.0)), 0.5);
}

double kld_to_prior(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw DimensionError("kld_to_prior: mu and sigma differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (!(sigma[j] > 0.0)) throw Error("kld_to_prior: sigma must be positive");
    const double var = sigma[j] * sigma[j];
    total += var + mu[j] * mu[j] - 1.0 - std::log(var);
  }
  return 0.5 * total;
}

}  // namespace traj::vte
