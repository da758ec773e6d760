#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/num/tensor.hpp"

namespace traj::eval {

struct EmbeddingRow {
  std::uint64_t traj_id = 0;
  int ability = 0;
  double return_label = 0.0;
  std::vector<double> mu;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Embeddings joined with the evaluation labels of their trajectories.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::vector<EmbeddingRow> rows);
  // Rows in dataset order; mu[i] belongs to data.trajectories[i].
  EmbeddingTable(const env::AbilityDataset& data, const std::vector<std::vector<double>>& mu);

  const std::vector<EmbeddingRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t dim() const { return rows_.empty() ? 0 : rows_[0].mu.size(); }
  int levels() const;

  num::Tensor points() const;
  num::Tensor points(const std::vector<std::size_t>& index) const;
  std::vector<int> abilities() const;

 private:
  std::vector<EmbeddingRow> rows_;
};

// Per level, shuffled with `seed`, the first round(test_fraction * count)
// rows go to test. Every level keeps at least one row on each side.
Split stratified_split(const EmbeddingTable& table, double test_fraction, std::uint64_t seed);

struct HeadConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-2;
};

struct ClassifierReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<int> predicted;  // test rows, in split order
};

// MLP d -> hidden -> M with softmax cross-entropy on standardized inputs.
ClassifierReport train_classifier(const EmbeddingTable& table, const Split& split, const HeadConfig& config,
                                  std::uint64_t seed);

struct RegressorReport {
  double test_relative_error = 0.0;  // percent
  std::vector<double> predicted;     // test rows, in split order
};

// MLP d -> hidden -> 1, squared error on standardized returns.
RegressorReport train_regressor(const EmbeddingTable& table, const Split& split, const HeadConfig& config,
                                std::uint64_t seed);

// Population std of each column.
std::vector<double> embedding_dim_std(const num::Tensor& points);

}  // namespace traj::eval
