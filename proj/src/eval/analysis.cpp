#include "traj/eval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "traj/error.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/iq/train.hpp"

namespace traj::eval {

using num::Tensor;

double DistanceMatrix::max_intra_level() const {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i].level != labels[j].level) continue;
      if (std::isnan(best) || values(i, j) > best) best = values(i, j);
    }
  }
  return best;
}

double DistanceMatrix::min_inter_level() const {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i].level == labels[j].level) continue;
      if (std::isnan(best) || values(i, j) < best) best = values(i, j);
    }
  }
  return best;
}

DistanceMatrix distance_heatmap(const std::map<int, Tensor>& embeddings, std::size_t replicates,
                                std::size_t group_size) {
  if (replicates == 0 || group_size == 0) throw Error("distance_heatmap: replicates and group size must be positive");
  DistanceMatrix out;
  std::vector<Tensor> groups;
  for (const auto& [level, rows] : embeddings) {
    if (rows.rows() < replicates * group_size || rows.size() == 0) {
      throw Error("distance_heatmap: level " + std::to_string(level) + " has " + std::to_string(rows.rows()) +
                  " embeddings, needs " + std::to_string(replicates * group_size));
    }
    for (std::size_t r = 0; r < replicates; ++r) {
      Tensor g = Tensor::zeros(group_size, rows.cols());
      for (std::size_t i = 0; i < group_size; ++i) {
        const auto src = rows.row_span(r * group_size + i);
        std::copy(src.begin(), src.end(), g.row_span(i).begin());
      }
      groups.push_back(std::move(g));
      out.labels.push_back({level, r});
    }
  }
  const std::size_t n = groups.size();
  out.values = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = wasserstein(groups[i], groups[j]);
      out.values(i, j) = w;
      out.values(j, i) = w;
    }
  }
  return out;
}

std::vector<PerturbRecord> perturb_sweep(iq::ConditionalAgent& agent, const env::Env& env,
                                         const std::vector<double>& base, std::size_t dim,
                                         const std::vector<double>& deltas, double unit, std::size_t rollouts,
                                         std::uint64_t seed) {
  if (dim >= base.size()) throw DimensionError("perturb_sweep: dimension out of range");
  if (base.size() != agent.embedding_dim()) throw DimensionError("perturb_sweep: embedding width does not match agent");
  std::vector<PerturbRecord> out;
  for (double delta : deltas) {
    std::vector<double> e = base;
    e[dim] += delta * unit;
    PerturbRecord rec;
    rec.delta = delta;
    double speed = 0.0, magnitude = 0.0, steps = 0.0;
    for (const auto& ro : iq::mean_action_rollouts(agent.actor, env, e, rollouts, seed)) {
      rec.returns.push_back(ro.total_return);
      rec.mean_return += ro.total_return;
      std::vector<std::pair<double, double>> trace;
      for (std::size_t t = 0; t < ro.states.rows(); ++t) {
        const auto v = env.velocity(ro.states.row_span(t));
        double vv = 0.0, aa = 0.0;
        for (double x : v) vv += x * x;
        for (double a : ro.actions.row_span(t)) aa += a * a;
        speed += std::sqrt(vv);
        magnitude += std::sqrt(aa);
        steps += 1.0;
        trace.push_back(env.position(ro.states.row_span(t)));
      }
      rec.traces.push_back(std::move(trace));
    }
    rec.mean_return /= static_cast<double>(rec.returns.size());
    rec.mean_speed = speed / steps;
    rec.mean_action_magnitude = magnitude / steps;
    out.push_back(std::move(rec));
  }
  return out;
}

bool monotone_returns(std::vector<PerturbRecord> records) {
  if (records.size() < 2) return false;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });
  bool up = true, down = true;
  for (std::size_t i = 1; i < records.size(); ++i) {
    up = up && records[i].mean_return > records[i - 1].mean_return;
    down = down && records[i].mean_return < records[i - 1].mean_return;
  }
  return up || down;
}

}  // namespace traj::eval
