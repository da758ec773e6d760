#include "traj/eval/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "traj/error.hpp"
#include "traj/num/rng.hpp"

namespace traj::eval {

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  if (n > m) throw DimensionError("hungarian: more rows than columns");
  for (const auto& row : cost) {
    if (row.size() != m) throw DimensionError("hungarian: ragged cost matrix");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials u (rows), v (cols); p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out.row_to_col[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) out.cost += cost[i][out.row_to_col[i]];
  return out;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

// Index of the nearest centroid; the lowest index wins ties.
std::size_t nearest_centroid(std::span<const double> point, const num::Tensor& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    const double dist = squared_distance(point, centroids.row_span(j));
    if (dist < best_d) {
      best_d = dist;
      best = j;
    }
  }
  return best;
}

void check_assign_shapes(const num::Tensor& points, const num::Tensor& centroids, std::vector<std::size_t>& labels) {
  if (points.cols() != centroids.cols()) throw DimensionError("assign_nearest: point and centroid widths differ");
  if (centroids.rows() == 0) throw Error("assign_nearest: no centroids");
  labels.resize(points.rows(), centroids.rows());
}

}  // namespace

bool assign_nearest(const num::Tensor& points, const num::Tensor& centroids, std::vector<std::size_t>& labels) {
  check_assign_shapes(points, centroids, labels);
  bool changed = false;
  const auto rows = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static) reduction(|| : changed)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t best = nearest_centroid(points.row_span(i), centroids);
    if (labels[i] != best) {
      labels[i] = best;
      changed = true;
    }
  }
  return changed;
}

namespace reference {

bool assign_nearest(const num::Tensor& points, const num::Tensor& centroids, std::vector<std::size_t>& labels) {
  check_assign_shapes(points, centroids, labels);
  bool changed = false;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const std::size_t best = nearest_centroid(points.row_span(i), centroids);
    changed = changed || labels[i] != best;
    labels[i] = best;
  }
  return changed;
}

}  // namespace reference

namespace {

KMeansResult lloyd(const num::Tensor& x, std::size_t k, num::Rng& rng, std::size_t max_iter) {
  const std::size_t n = x.rows(), d = x.cols();
  num::Tensor c = num::Tensor::zeros(k, d);
  // k-means++ seeding
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy(x.row_span(first).begin(), x.row_span(first).end(), c.row_span(0).begin());
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(x.row_span(i), c.row_span(j - 1)));
    double total = 0.0;
    for (double v : nearest) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      pick = rng.categorical(nearest);
    } else {
      pick = rng.index(n);
    }
    std::copy(x.row_span(pick).begin(), x.row_span(pick).end(), c.row_span(j).begin());
  }

  KMeansResult r;
  r.labels.assign(n, k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const bool changed = assign_nearest(x, c, r.labels);
    if (!changed) break;
    num::Tensor sums = num::Tensor::zeros(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.labels[i]];
      for (std::size_t t = 0; t < d; ++t) sums(r.labels[i], t) += x(i, t);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t t = 0; t < d; ++t) c(j, t) = sums(j, t) / static_cast<double>(counts[j]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += squared_distance(x.row_span(i), c.row_span(r.labels[i]));
  r.centroids = std::move(c);
  return r;
}

}  // namespace

std::size_t distinct_rows(const num::Tensor& points) {
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < points.rows(); ++i) rows.insert(points.row_vector(i));
  return rows.size();
}

KMeansResult kmeans(const num::Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iter) {
  if (k == 0) throw Error("kmeans: k must be positive");
  if (points.rows() < k) throw Error("kmeans: fewer rows than clusters");
  if (distinct_rows(points) < k) {
    throw Error("kmeans: k=" + std::to_string(k) + " exceeds the number of distinct rows");
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    num::Rng rng(num::derive_seed(seed, r));
    KMeansResult cur = lloyd(points, k, rng, max_iter);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

double matched_accuracy(const std::vector<std::size_t>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) throw DimensionError("matched_accuracy: size mismatch");
  std::map<std::size_t, std::size_t> pred_ids;
  std::map<int, std::size_t> true_ids;
  for (std::size_t p : predicted) pred_ids.emplace(p, pred_ids.size());
  for (int t : truth) true_ids.emplace(t, true_ids.size());
  const std::size_t side = std::max(pred_ids.size(), true_ids.size());
  std::vector<std::vector<double>> cost(side, std::vector<double>(side, 0.0));
  for (std::size_t i = 0; i < predicted.size(); ++i) cost[pred_ids[predicted[i]]][true_ids[truth[i]]] -= 1.0;
  const Assignment a = hungarian(cost);
  return -a.cost / static_cast<double>(predicted.size());
}

double kmeans_hungarian_accuracy(const num::Tensor& points, const std::vector<int>& truth, std::size_t k,
                                 std::uint64_t seed) {
  if (points.rows() != truth.size()) throw DimensionError("kmeans_hungarian: labels do not match rows");
  return matched_accuracy(kmeans(points, k, seed).labels, truth);
}

PcaResult pca(const num::Tensor& points, std::size_t k) {
  const std::size_t n = points.rows(), d = points.cols();
  if (n < k) throw Error("pca: fewer rows than components");
  k = std::min(k, d);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j) / static_cast<double>(n);
  }
  num::Tensor centered = points;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) -= mean[j];
  }
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += centered(i, a) * centered(i, b) / static_cast<double>(n);
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov[a * d + a];

  PcaResult out;
  std::vector<std::vector<double>> comps;
  num::Rng rng(0x5eed);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (double& e : v) e = rng.normal();
    double lambda = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) w[a] += cov[a * d + b] * v[b];
      }
      // keep orthogonal to earlier components against round-off
      for (const auto& prev : comps) {
        double dot = 0.0;
        for (std::size_t a = 0; a < d; ++a) dot += w[a] * prev[a];
        for (std::size_t a = 0; a < d; ++a) w[a] -= dot * prev[a];
      }
      double norm = 0.0;
      for (double e : w) norm += e * e;
      norm = std::sqrt(norm);
      if (norm < 1e-300) {
        lambda = 0.0;
        break;
      }
      double diff = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        w[a] /= norm;
        diff = std::max(diff, std::abs(std::abs(w[a]) - std::abs(v[a])));
      }
      v = std::move(w);
      lambda = norm;
      if (diff < 1e-14) break;
    }
    if (lambda <= 1e-12 * std::max(trace, 1e-300)) {
      out.rank_deficient = true;
      break;
    }
    // Rayleigh quotient for the variance, then deflate.
    double rq = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) rq += v[a] * cov[a * d + b] * v[b];
    }
    std::size_t big = 0;
    for (std::size_t a = 1; a < d; ++a) {
      if (std::abs(v[a]) > std::abs(v[big]) + 1e-12) big = a;
    }
    if (v[big] < 0) {
      for (double& e : v) e = -e;
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] -= rq * v[a] * v[b];
    }
    out.explained_variance.push_back(rq);
    comps.push_back(v);
  }
  const std::size_t got = comps.size();
  if (got == 0) {
    out.components = num::Tensor();
    out.projected = num::Tensor();
    return out;
  }
  out.components = num::Tensor::zeros(got, d);
  for (std::size_t c = 0; c < got; ++c) std::copy(comps[c].begin(), comps[c].end(), out.components.row_span(c).begin());
  out.projected = num::Tensor::zeros(n, got);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < got; ++c) {
      double dot = 0.0;
      for (std::size_t a = 0; a < d; ++a) dot += centered(i, a) * comps[c][a];
      out.projected(i, c) = dot;
    }
  }
  return out;
}

double wasserstein(const num::Tensor& a, const num::Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("wasserstein: sets must have equal size (" + std::to_string(a.rows()) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  if (a.cols() != b.cols()) throw DimensionError("wasserstein: dimension mismatch");
  // Fixed argument order makes the result exactly symmetric.
  if (std::lexicographical_compare(b.data().begin(), b.data().end(), a.data().begin(), a.data().end())) {
    return wasserstein(b, a);
  }
  const std::size_t n = a.rows();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::sqrt(squared_distance(a.row_span(i), b.row_span(j)));
  }
  return hungarian(cost).cost / static_cast<double>(n);
}

}  // namespace traj::eval
