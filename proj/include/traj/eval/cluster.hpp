#pragma once

#include <cstdint>
#include <vector>

#include "traj/num/tensor.hpp"

namespace traj::eval {

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

// Minimum-cost assignment of every row to a distinct column (rows <= cols),
// O(rows^2 * cols) shortest augmenting paths with potentials.
Assignment hungarian(const std::vector<std::vector<double>>& cost);

struct KMeansResult {
  std::vector<std::size_t> labels;
  num::Tensor centroids;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds; the best of `restarts` runs by
// inertia. Rows of `points` are observations.
KMeansResult kmeans(const num::Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 20,
                    std::size_t max_iter = 300);

// One Lloyd assignment step: labels[i] becomes the index of the nearest
// centroid row (lowest index on ties). Labels are resized to the row count,
// new entries start out of range. Returns whether any label changed.
bool assign_nearest(const num::Tensor& points, const num::Tensor& centroids, std::vector<std::size_t>& labels);

namespace reference {
// Serial version of assign_nearest, kept as the test oracle and benchmark baseline.
bool assign_nearest(const num::Tensor& points, const num::Tensor& centroids, std::vector<std::size_t>& labels);
}  // namespace reference

// Best accuracy over one-to-one matchings of predicted cluster ids to true
// labels. Labels are arbitrary non-negative integers.
double matched_accuracy(const std::vector<std::size_t>& predicted, const std::vector<int>& truth);

std::size_t distinct_rows(const num::Tensor& points);

double kmeans_hungarian_accuracy(const num::Tensor& points, const std::vector<int>& truth, std::size_t k,
                                 std::uint64_t seed);

struct PcaResult {
  num::Tensor components;  // k x d, unit rows
  std::vector<double> explained_variance;
  num::Tensor projected;   // n x k
  bool rank_deficient = false;
};

// Top-k principal components of the population covariance by power
// iteration with deflation. Each component's largest-magnitude entry is made
// positive.
PcaResult pca(const num::Tensor& points, std::size_t k);

// W1 between equal-size uniform empirical distributions: average cost of the
// optimal matching under the Euclidean metric.
double wasserstein(const num::Tensor& a, const num::Tensor& b);

}  // namespace traj::eval
