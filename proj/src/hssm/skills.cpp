#include "traj/hssm/skills.hpp"

#include <algorithm>
#include <cmath>

#include "traj/error.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/hssm/elbo.hpp"

namespace traj::hssm {

namespace {

constexpr double kFloor = 1e-8;

std::vector<SkillAnnotation> annotate(HssmModel& model, const std::vector<env::StateActionView>& views) {
  num::Graph g(false);
  ElboTables tab = build_tables(g, model, views);
  ElboTerms terms = exact_elbo(g, tab);
  const std::size_t B = views.size(), T = tab.length, l = tab.skills;
  std::vector<SkillAnnotation> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    out[b].z_logits = num::Tensor::zeros(T, l);
    out[b].m_logits = num::Tensor::zeros(T, 2);
    for (std::size_t t = 0; t < T; ++t) {
      const num::Tensor& alpha = terms.skills[t].value();
      for (std::size_t j = 0; j < l; ++j) out[b].z_logits(t, j) = std::log(std::max(alpha(b, j), kFloor));
      const double q = terms.boundaries[t].value()(b, 0);
      out[b].m_logits(t, 0) = std::log(std::max(1.0 - q, kFloor));
      out[b].m_logits(t, 1) = std::log(std::max(q, kFloor));
    }
  }
  return out;
}

}  // namespace

SkillAnnotation se_logit(HssmModel& model, const env::StateActionView& traj) { return annotate(model, {traj})[0]; }

std::vector<SkillAnnotation> se_logit_all(HssmModel& model, const env::AbilityDataset& data) {
  constexpr std::size_t chunk = 16;
  const std::size_t n = data.trajectories.size();
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<SkillAnnotation> out(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk, hi = std::min(n, lo + chunk);
    std::vector<env::StateActionView> views;
    for (std::size_t i = lo; i < hi; ++i) views.push_back(data.trajectories[i].view());
    auto part = annotate(model, views);
    for (std::size_t i = lo; i < hi; ++i) out[i] = std::move(part[i - lo]);
  }
  return out;
}

SkillSample se_sample(HssmModel& model, const env::StateActionView& traj, std::uint64_t seed) {
  num::Graph g(false);
  ElboTables tab = build_tables(g, model, {traj});
  const std::size_t T = tab.length, l = tab.skills;
  num::Rng rng(seed);
  SkillSample s;
  std::vector<double> probs(l);
  auto draw = [&](const num::Tensor& log_table, std::size_t row) {
    for (std::size_t k = 0; k < l; ++k) probs[k] = std::exp(log_table(row, k));
    return rng.categorical(probs);
  };
  s.skills.push_back(draw(tab.log_qnew[0].value(), 0));
  s.boundaries.push_back(1);
  for (std::size_t t = 1; t < T; ++t) {
    const double q = 1.0 / (1.0 + std::exp(-tab.qm_logit[t].value().item()));
    const bool boundary = rng.bernoulli(q);
    s.boundaries.push_back(boundary ? 1 : 0);
    s.skills.push_back(boundary ? draw(tab.log_qnew[t].value(), s.skills.back()) : s.skills.back());
  }
  return s;
}

double boundary_alignment(const SkillAnnotation& a, const std::vector<std::size_t>& switches, std::size_t tolerance) {
  if (switches.empty()) return 1.0;
  const std::size_t T = a.m_logits.rows();
  std::size_t hit = 0;
  for (std::size_t s : switches) {
    const std::size_t lo = s > tolerance ? s - tolerance : 1;
    for (std::size_t t = std::max<std::size_t>(lo, 1); t < std::min(T, s + tolerance + 1); ++t) {
      if (a.m_logits(t, 1) > a.m_logits(t, 0)) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(switches.size());
}

std::vector<double> mean_pool(const SkillAnnotation& a) {
  const std::size_t T = a.z_logits.rows(), l = a.z_logits.cols();
  if (T == 0 || a.z_logits.size() != T * l) throw Error("mean_pool: empty annotation");
  std::vector<double> out(l, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < l; ++j) out[j] += a.z_logits(t, j);
  }
  for (double& v : out) v /= static_cast<double>(T);
  return out;
}

double clustering_error(const std::vector<SkillAnnotation>& annotations, const env::AbilityDataset& data,
                        std::uint64_t seed) {
  const std::size_t n = annotations.size();
  if (n != data.trajectories.size()) throw DimensionError("clustering_error: annotation count mismatch");
  if (n < static_cast<std::size_t>(data.levels)) throw Error("clustering_error: fewer trajectories than levels");
  const std::size_t l = annotations[0].z_logits.cols();
  num::Tensor points = num::Tensor::zeros(n, l);
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pooled = mean_pool(annotations[i]);
    std::copy(pooled.begin(), pooled.end(), points.row_span(i).begin());
    truth[i] = data.trajectories[i].eval_labels().ability;
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(data.levels), eval::distinct_rows(points));
  return 1.0 - eval::kmeans_hungarian_accuracy(points, truth, k, seed);
}

double clustering_error(HssmModel& model, const env::AbilityDataset& data, std::uint64_t seed) {
  return clustering_error(se_logit_all(model, data), data, seed);
}

}  // namespace traj::hssm
