#include "traj/eval/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "traj/error.hpp"
#include "traj/num/adam.hpp"
#include "traj/num/nn.hpp"

namespace traj::eval {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

struct Standardizer {
  std::vector<double> mean, scale;

  Standardizer(const Tensor& x) : mean(x.cols(), 0.0), scale(x.cols(), 0.0) {
    const std::size_t n = x.rows();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) scale[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
    }
    // Constant columns pass through centered.
    for (double& s : scale) s = s > 0.0 ? std::sqrt(s / static_cast<double>(n)) : 1.0;
  }

  Tensor apply(Tensor x) const {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x(r, c) - mean[c]) / scale[c];
    }
    return x;
  }
};

void check_split(const EmbeddingTable& table, const Split& split) {
  if (table.size() == 0) throw Error("downstream: empty embedding table");
  if (split.train.empty() || split.test.empty()) throw Error("downstream: both splits must be non-empty");
  for (auto i : split.train) {
    if (i >= table.size()) throw DimensionError("downstream: split index out of range");
  }
  for (auto i : split.test) {
    if (i >= table.size()) throw DimensionError("downstream: split index out of range");
  }
}

template <typename LossFn>
void fit(num::Mlp& net, const Tensor& x, std::size_t n, const HeadConfig& cfg, num::Rng& rng, LossFn loss) {
  std::vector<num::Parameter*> params;
  net.collect(params);
  num::Adam opt({.lr = cfg.lr});
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = rng.permutation(n);
    for (std::size_t lo = 0; lo < n; lo += batch) {
      std::vector<std::size_t> index(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, lo + batch)));
      num::zero_grads(params);
      Graph g;
      Var out = net(g, num::gather_rows(g.constant(x), index));
      Var l = loss(g, out, index);
      if (!std::isfinite(l.value().item())) throw NumericError("downstream head", l.id(), "non-finite loss");
      g.backward(l);
      opt.step(params);
    }
  }
}

Tensor predict(num::Mlp& net, const Tensor& x) {
  Graph g(false);
  return net(g, g.constant(x)).value();
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<EmbeddingRow> rows) : rows_(std::move(rows)) {
  std::set<std::uint64_t> ids;
  for (const auto& r : rows_) {
    if (!ids.insert(r.traj_id).second) throw Error("embedding table: duplicate trajectory id " + std::to_string(r.traj_id));
    if (r.mu.size() != rows_[0].mu.size()) throw DimensionError("embedding table: ragged rows");
    if (r.ability < 1) throw Error("embedding table: ability tags start at 1");
  }
}

EmbeddingTable::EmbeddingTable(const env::AbilityDataset& data, const std::vector<std::vector<double>>& mu)
    : EmbeddingTable([&] {
        if (mu.size() != data.trajectories.size()) throw DimensionError("embedding table: one row per trajectory");
        std::vector<EmbeddingRow> rows;
        for (std::size_t i = 0; i < mu.size(); ++i) {
          const auto& t = data.trajectories[i];
          rows.push_back({t.id(), t.eval_labels().ability, t.eval_labels().return_label, mu[i]});
        }
        return rows;
      }()) {}

int EmbeddingTable::levels() const {
  int m = 0;
  for (const auto& r : rows_) m = std::max(m, r.ability);
  return m;
}

Tensor EmbeddingTable::points() const {
  std::vector<std::size_t> all(rows_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return points(all);
}

Tensor EmbeddingTable::points(const std::vector<std::size_t>& index) const {
  Tensor out = Tensor::zeros(index.size(), dim());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto& mu = rows_.at(index[r]).mu;
    std::copy(mu.begin(), mu.end(), out.row_span(r).begin());
  }
  return out;
}

std::vector<int> EmbeddingTable::abilities() const {
  std::vector<int> out;
  for (const auto& r : rows_) out.push_back(r.ability);
  return out;
}

Split stratified_split(const EmbeddingTable& table, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("split: test fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_level;
  for (std::size_t i = 0; i < table.size(); ++i) by_level[table.rows()[i].ability].push_back(i);
  num::Rng rng(seed);
  Split split;
  for (auto& [level, members] : by_level) {
    if (members.size() < 2) throw Error("split: level " + std::to_string(level) + " needs at least two rows");
    const auto perm = rng.permutation(members.size());
    std::size_t n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_test ? split.test : split.train).push_back(members[perm[i]]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ClassifierReport train_classifier(const EmbeddingTable& table, const Split& split, const HeadConfig& cfg,
                                  std::uint64_t seed) {
  check_split(table, split);
  const int M = table.levels();
  if (M < 2) throw Error("classifier: need at least two ability levels");
  for (int level = 1; level <= M; ++level) {
    for (const auto* part : {&split.train, &split.test}) {
      bool found = false;
      for (auto i : *part) found = found || table.rows()[i].ability == level;
      if (!found) {
        throw Error("classifier: level " + std::to_string(level) + " missing from the " +
                    (part == &split.train ? "train" : "test") + " split");
      }
    }
  }
  const Standardizer norm(table.points(split.train));
  const Tensor x_train = norm.apply(table.points(split.train)), x_test = norm.apply(table.points(split.test));
  Tensor onehot = Tensor::zeros(split.train.size(), static_cast<std::size_t>(M));
  for (std::size_t r = 0; r < split.train.size(); ++r) {
    onehot(r, static_cast<std::size_t>(table.rows()[split.train[r]].ability - 1)) = 1.0;
  }
  num::Rng rng(seed);
  num::Mlp net("classifier", {table.dim(), cfg.hidden, static_cast<std::size_t>(M)}, num::Activation::Relu,
               num::Activation::Identity, rng);
  fit(net, x_train, split.train.size(), cfg, rng, [&](Graph& g, Var logits, const std::vector<std::size_t>& index) {
    Var target = num::gather_rows(g.constant(onehot), index);
    return num::neg(num::mean(num::sum_cols(target * num::log_softmax_rows(logits))));
  });

  auto accuracy = [&](const Tensor& x, const std::vector<std::size_t>& index, std::vector<int>* out) {
    const Tensor logits = predict(net, x);
    std::size_t hit = 0;
    for (std::size_t r = 0; r < index.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        if (logits(r, c) > logits(r, best)) best = c;
      }
      const int label = static_cast<int>(best) + 1;
      if (out) out->push_back(label);
      if (label == table.rows()[index[r]].ability) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(index.size());
  };
  ClassifierReport report;
  report.train_accuracy = accuracy(x_train, split.train, nullptr);
  report.test_accuracy = accuracy(x_test, split.test, &report.predicted);
  return report;
}

RegressorReport train_regressor(const EmbeddingTable& table, const Split& split, const HeadConfig& cfg,
                                std::uint64_t seed) {
  check_split(table, split);
  for (auto i : split.test) {
    if (table.rows()[i].return_label == 0.0) throw Error("regressor: zero target return in the test split");
  }
  const Standardizer norm(table.points(split.train));
  const Tensor x_train = norm.apply(table.points(split.train)), x_test = norm.apply(table.points(split.test));
  Tensor y = Tensor::zeros(split.train.size(), 1);
  for (std::size_t r = 0; r < split.train.size(); ++r) y(r, 0) = table.rows()[split.train[r]].return_label;
  const Standardizer y_norm(y);
  const Tensor y_std = y_norm.apply(y);

  num::Rng rng(seed);
  num::Mlp net("regressor", {table.dim(), cfg.hidden, 1}, num::Activation::Relu, num::Activation::Identity, rng);
  fit(net, x_train, split.train.size(), cfg, rng, [&](Graph& g, Var pred, const std::vector<std::size_t>& index) {
    return num::mean(num::square(pred - num::gather_rows(g.constant(y_std), index)));
  });

  const Tensor out = predict(net, x_test);
  RegressorReport report;
  double total = 0.0;
  for (std::size_t r = 0; r < split.test.size(); ++r) {
    const double pred = out(r, 0) * y_norm.scale[0] + y_norm.mean[0];
    const double target = table.rows()[split.test[r]].return_label;
    report.predicted.push_back(pred);
    total += std::abs(pred - target) / std::abs(target);
  }
  report.test_relative_error = 100.0 * total / static_cast<double>(split.test.size());
  return report;
}

std::vector<double> embedding_dim_std(const Tensor& points) {
  if (points.rows() < 2 || points.size() == 0) throw Error("embedding_dim_std: need at least two rows");
  const std::size_t n = points.rows(), d = points.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += points(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) var[c] += (points(r, c) - mean[c]) * (points(r, c) - mean[c]);
  }
  for (double& v : var) v = std::sqrt(v / static_cast<double>(n));
  return var;
}

}  // namespace traj::eval
