#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "traj/env/dataset.hpp"
#include "traj/error.hpp"
#include "traj/eval/analysis.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/eval/downstream.hpp"
#include "traj/eval/plots.hpp"
#include "traj/iq/train.hpp"
#include "traj/log.hpp"

using namespace traj;
using namespace traj::eval;
using num::Rng;
using num::Tensor;

namespace {

// Three well separated Gaussian blobs, `per` rows each, labels 0, 1, 2.
std::pair<Tensor, std::vector<int>> blobs(std::size_t per, std::size_t dim, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = Tensor::zeros(3 * per, dim);
  std::vector<int> labels;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      for (std::size_t k = 0; k < dim; ++k) x(r, k) = spread * rng.normal() + (k == c % dim ? 5.0 : 0.0) * (1.0 + c);
      labels.push_back(static_cast<int>(c));
    }
  }
  return {x, labels};
}

// Cluster labels 0.. become ability tags 1..
EmbeddingTable table_from(const Tensor& x, const std::vector<int>& ability, const std::vector<double>& returns) {
  std::vector<EmbeddingRow> rows;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto span = x.row_span(r);
    rows.push_back({r + 1, ability[r] + 1, returns[r], std::vector<double>(span.begin(), span.end())});
  }
  return EmbeddingTable(std::move(rows));
}

}  // namespace

TEST_CASE("hungarian: two-by-two example and brute-force agreement") {
  const auto a = hungarian({{1, 2}, {2, 1}});
  CHECK(a.row_to_col == std::vector<std::size_t>{0, 1});
  CHECK(a.cost == 2.0);
  const auto rect = hungarian({{5, 1, 9}, {1, 7, 3}});
  CHECK(rect.row_to_col == std::vector<std::size_t>{1, 0});
  CHECK(rect.cost == 2.0);
  CHECK_THROWS_AS(hungarian({{1.0}, {2.0}}), Error);
}

TEST_CASE("wasserstein examples") {
  const Tensor a = Tensor::matrix({{0.0}, {1.0}}), b = Tensor::matrix({{1.0}, {2.0}});
  CHECK(wasserstein(a, b) == doctest::Approx(1.0));
  CHECK(wasserstein(a, a) == 0.0);
  CHECK(wasserstein(Tensor::matrix({{0.0, 0.0}}), Tensor::matrix({{3.0, 4.0}})) == doctest::Approx(5.0));
  CHECK_THROWS_AS(wasserstein(a, Tensor::matrix({{1.0}})), Error);
  CHECK_THROWS_AS(wasserstein(a, Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}})), DimensionError);
}

TEST_CASE("wasserstein is a metric and matches permutation enumeration") {
  Rng rng(21);
  double worst_oracle = 0.0, worst_triangle = -1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 5, d = 1 + trial % 3;
    const Tensor x = rng.normal_tensor(n, d), y = rng.normal_tensor(n, d), z = rng.normal_tensor(n, d);
    const double xy = wasserstein(x, y), yx = wasserstein(y, x), xz = wasserstein(x, z), yz = wasserstein(y, z);
    worst_oracle = std::max(worst_oracle, std::abs(xy - testing::wasserstein_enumerated(x, y)));
    CHECK(xy == yx);
    worst_triangle = std::max(worst_triangle, xz - (xy + yz));
    CHECK(xy > 1e-9);
    // A row permutation of the same multiset is at distance zero.
    Tensor shuffled = Tensor::zeros(n, d);
    const auto perm = rng.permutation(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < d; ++k) shuffled(r, k) = x(perm[r], k);
    }
    CHECK(wasserstein(x, shuffled) <= 1e-9);
  }
  CHECK(worst_oracle < 1e-12);
  CHECK(worst_triangle <= 1e-6);
}

TEST_CASE("pca: explained variance matches a dense eigensolver") {
  Rng rng(4);
  Tensor x = rng.normal_tensor(200, 5);
  // Anisotropic mixing so the eigenvalues are distinct.
  const Tensor mix = rng.uniform_tensor(5, 5, -1, 1);
  Tensor y = Tensor::zeros(200, 5);
  for (std::size_t r = 0; r < 200; ++r) {
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t j = 0; j < 5; ++j) y(r, k) += x(r, j) * mix(j, k) * (1.0 + j);
    }
  }
  Eigen::MatrixXd m(200, 5);
  for (std::size_t r = 0; r < 200; ++r) {
    for (std::size_t k = 0; k < 5; ++k) m(r, k) = y(r, k);
  }
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 200.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto values = solver.eigenvalues();  // ascending
  const auto result = pca(y, 2);
  REQUIRE(result.explained_variance.size() == 2);
  CHECK(std::abs(result.explained_variance[0] - values(4)) < 1e-8);
  CHECK(std::abs(result.explained_variance[1] - values(3)) < 1e-8);
  for (std::size_t c = 0; c < 2; ++c) {
    const Eigen::VectorXd v = solver.eigenvectors().col(4 - c);
    double dot = 0.0, largest = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      dot += v(k) * result.components(c, k);
      if (std::abs(result.components(c, k)) > std::abs(largest)) largest = result.components(c, k);
    }
    CHECK(std::abs(std::abs(dot) - 1.0) < 1e-8);
    CHECK(largest > 0.0);
  }
  CHECK(!result.rank_deficient);

  const auto again = pca(y, 2);
  CHECK(again.projected == result.projected);
}

TEST_CASE("pca degenerate and axis-aligned cases") {
  // Variance 4 along y and 1 along x: first component is the y axis.
  const Tensor axes = Tensor::matrix({{1, 0}, {-1, 0}, {0, 2}, {0, -2}});
  const auto r = pca(axes, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(r.projected(i, 0)) == doctest::Approx(std::abs(axes(i, 1))));
    CHECK(std::abs(r.projected(i, 1)) == doctest::Approx(std::abs(axes(i, 0))));
  }

  Rng rng(2);
  Tensor line = Tensor::zeros(30, 10);
  const Tensor dir = rng.normal_tensor(1, 10);
  for (std::size_t i = 0; i < 30; ++i) {
    const double t = rng.normal();
    for (std::size_t k = 0; k < 10; ++k) line(i, k) = t * dir(0, k);
  }
  log::set_level(log::Level::Quiet);
  const auto rank1 = pca(line, 2);
  log::set_level(log::Level::Warn);
  CHECK(rank1.rank_deficient);
  REQUIRE(rank1.explained_variance.size() >= 1);
  if (rank1.explained_variance.size() == 2) CHECK(rank1.explained_variance[1] < 1e-9);
  CHECK_THROWS_AS(pca(Tensor::matrix({{1.0, 2.0}}), 2), Error);
}

TEST_CASE("kmeans_hungarian: separated clusters, k = 1, errors and invariances") {
  auto [x, labels] = blobs(20, 3, 0.3, 5);
  CHECK(kmeans_hungarian_accuracy(x, labels, 3, 1) == 1.0);

  std::vector<int> uneven(60, 0);
  for (std::size_t i = 0; i < 60; ++i) uneven[i] = i < 30 ? 2 : (i < 45 ? 0 : 1);
  CHECK(kmeans_hungarian_accuracy(x, uneven, 1, 1) == doctest::Approx(0.5));

  const Tensor duplicate = Tensor::matrix({{1, 1}, {1, 1}, {2, 2}});
  CHECK(distinct_rows(duplicate) == 2);
  CHECK_THROWS_AS(kmeans_hungarian_accuracy(duplicate, {0, 1, 2}, 3, 1), Error);

  // Overlapping blobs so the accuracy is not trivially 1.
  auto [noisy, truth] = blobs(20, 3, 3.0, 6);
  const double base = kmeans_hungarian_accuracy(noisy, truth, 3, 2);
  CHECK(base < 1.0);
  std::vector<int> relabeled;
  for (int l : truth) relabeled.push_back(l == 0 ? 7 : (l == 1 ? 3 : 5));
  CHECK(kmeans_hungarian_accuracy(noisy, relabeled, 3, 2) == base);

  // Rotate about a random axis pair.
  Tensor rotated = noisy;
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (std::size_t r = 0; r < rotated.rows(); ++r) {
    const double u = noisy(r, 0), v = noisy(r, 2);
    rotated(r, 0) = c * u - s * v;
    rotated(r, 2) = s * u + c * v;
  }
  CHECK(kmeans_hungarian_accuracy(rotated, truth, 3, 2) == doctest::Approx(base));
}

TEST_CASE("matched_accuracy picks the best one-to-one relabeling") {
  CHECK(matched_accuracy({1, 1, 0, 0}, {0, 0, 1, 1}) == 1.0);
  CHECK(matched_accuracy({0, 0, 0, 1}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(matched_accuracy({0, 1}, {0}), Error);
}

TEST_CASE("embedding table and stratified split") {
  auto [x, labels] = blobs(10, 2, 0.1, 1);
  std::vector<double> returns(x.rows(), 1.0);
  auto table = table_from(x, labels, returns);
  CHECK(table.levels() == 3);
  CHECK(table.dim() == 2);
  const auto split = stratified_split(table, 0.3, 4);
  std::set<std::size_t> seen;
  for (auto i : split.train) seen.insert(i);
  for (auto i : split.test) CHECK(seen.insert(i).second);
  CHECK(seen.size() == table.size());
  std::vector<int> per_level(3, 0);
  for (auto i : split.test) ++per_level[table.rows()[i].ability - 1];
  for (int c : per_level) CHECK(std::abs(c - 3) <= 1);
  CHECK(stratified_split(table, 0.3, 4).test == split.test);

  auto rows = table.rows();
  rows[1].traj_id = rows[0].traj_id;
  CHECK_THROWS_AS(EmbeddingTable{rows}, Error);
}

TEST_CASE("classifier: separable clusters, identical embeddings, missing level, determinism") {
  auto [x, labels] = blobs(20, 3, 0.3, 3);
  std::vector<double> returns(x.rows(), 1.0);
  auto table = table_from(x, labels, returns);
  const auto split = stratified_split(table, 0.25, 1);
  HeadConfig cfg;
  cfg.epochs = 80;
  const auto report = train_classifier(table, split, cfg, 2);
  CHECK(report.test_accuracy == 1.0);
  CHECK(report.train_accuracy == 1.0);
  CHECK(train_classifier(table, split, cfg, 2).predicted == report.predicted);

  Tensor same = Tensor::zeros(x.rows(), 3);
  same.fill(0.5);
  const auto flat = train_classifier(table_from(same, labels, returns), split, cfg, 2);
  CHECK(flat.test_accuracy == doctest::Approx(1.0 / 3.0).epsilon(0.05));

  Split missing = split;
  std::erase_if(missing.test, [&](std::size_t i) { return table.rows()[i].ability == 3; });
  CHECK_THROWS_AS(train_classifier(table, missing, cfg, 2), Error);
}

TEST_CASE("regressor: constant targets, identity feature, zero target") {
  Rng rng(8);
  const std::size_t n = 60;
  Tensor x = Tensor::zeros(n, 1);
  std::vector<int> labels;
  std::vector<double> returns, constant(n, 4.0);
  for (std::size_t i = 0; i < n; ++i) {
    returns.push_back(rng.uniform(2.0, 10.0));
    x(i, 0) = returns.back();
    labels.push_back(static_cast<int>(i % 3));
  }
  HeadConfig cfg;
  cfg.epochs = 300;
  auto identity = table_from(x, labels, returns);
  const auto split = stratified_split(identity, 0.25, 3);
  const auto fit = train_regressor(identity, split, cfg, 1);
  CHECK(fit.test_relative_error < 1.0);
  CHECK(train_regressor(identity, split, cfg, 1).predicted == fit.predicted);
  CHECK(train_regressor(table_from(x, labels, constant), split, cfg, 1).test_relative_error < 0.01);

  auto zero = returns;
  zero[split.test[0]] = 0.0;
  CHECK_THROWS_AS(train_regressor(table_from(x, labels, zero), split, cfg, 1), Error);
}

TEST_CASE("embedding_dim_std examples") {
  CHECK(embedding_dim_std(Tensor::matrix({{1, 2}, {1, 2}})) == std::vector<double>{0.0, 0.0});
  const auto s = embedding_dim_std(Tensor::matrix({{0, 0}, {2, 0}}));
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == 0.0);
  CHECK_THROWS_AS(embedding_dim_std(Tensor::matrix({{1, 2}})), Error);

  const Tensor pooled = Tensor::matrix({{0.86, 0.85, 0.87, 0.86, 0.87, 0.88, 0.85, 0.87, 0.90, 0.85},
                                        {0.83, 0.82, 0.83, 0.83, 0.83, 0.84, 0.82, 0.83, 0.86, 0.82},
                                        {0.83, 0.82, 0.82, 0.83, 0.83, 0.84, 0.81, 0.83, 0.86, 0.82}});
  const Tensor variational = Tensor::matrix({{-0.84, 0.86, -0.97, -0.91, 1.05, 1.10, 0.88, 0.74, -0.79, 1.12},
                                             {-0.83, 0.33, -0.57, -0.59, 0.68, 0.41, 0.94, 0.65, -0.33, 0.55},
                                             {-0.86, 0.59, -0.78, -0.75, 0.87, 0.72, 0.92, 0.69, -0.57, 0.82}});
  const auto a = embedding_dim_std(pooled), b = embedding_dim_std(variational);
  CHECK(std::accumulate(b.begin(), b.end(), 0.0) > std::accumulate(a.begin(), a.end(), 0.0));
}

TEST_CASE("distance heatmap structure") {
  Rng rng(3);
  const Tensor group = rng.normal_tensor(10, 2);
  Tensor twice = Tensor::zeros(20, 2);
  for (std::size_t r = 0; r < 20; ++r) {
    for (std::size_t k = 0; k < 2; ++k) twice(r, k) = group(r % 10, k);
  }
  const auto same = distance_heatmap({{0, twice}}, 2);
  CHECK(same.values(0, 1) == 0.0);
  CHECK(std::isnan(same.min_inter_level()));

  std::map<int, Tensor> levels;
  for (int l = 0; l < 3; ++l) {
    Tensor e = rng.normal_tensor(30, 3);
    for (std::size_t r = 0; r < 30; ++r) e(r, 0) += 4.0 * l;
    levels[l] = e;
  }
  const auto m = distance_heatmap(levels, 3);
  REQUIRE(m.labels.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(m.values(i, i) == 0.0);
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(std::abs(m.values(i, j) - m.values(j, i)) <= 1e-9);
      CHECK(m.values(i, j) >= 0.0);
      for (std::size_t k = 0; k < 9; ++k) CHECK(m.values(i, k) <= m.values(i, j) + m.values(j, k) + 1e-6);
    }
  }
  CHECK(m.max_intra_level() < m.min_inter_level());
  CHECK_THROWS_AS(distance_heatmap(levels, 4), Error);

  const auto csv = heatmap_csv(m);
  CHECK(csv.rfind("group,L0_r0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  const auto svg = heatmap_svg(m, "W1 <groups>");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("&lt;groups&gt;") != std::string::npos);
  CHECK(svg == heatmap_svg(m, "W1 <groups>"));
}

TEST_CASE("perturbation sweep: control row, reproducibility, plots") {
  auto spec = env::default_spec("waypoint2d", 25);
  auto world = env::make_env(spec);
  Rng rng(5);
  iq::AgentConfig cfg;
  cfg.actor_hidden = {8};
  cfg.critic_hidden = {8};
  iq::ConditionalAgent agent(spec, 3, cfg, rng);
  const std::vector<double> base{0.2, -0.1, 0.4};
  const std::vector<double> deltas{-2, -1, 0, 1, 2};
  const auto sweep = perturb_sweep(agent, *world, base, 1, deltas, 0.5, 3, 11);
  REQUIRE(sweep.size() == 5);
  const auto control = iq::eval_conditioned(agent, *world, base, 3, 11);
  CHECK(sweep[2].returns == control.returns);
  CHECK(sweep[2].mean_return == doctest::Approx(control.mean));
  for (const auto& rec : sweep) {
    CHECK(rec.traces.size() == 3);
    CHECK(rec.traces[0].size() == 25);
    CHECK(rec.mean_speed >= 0.0);
    CHECK(rec.mean_action_magnitude <= std::sqrt(2.0));
  }
  const auto again = perturb_sweep(agent, *world, base, 1, deltas, 0.5, 3, 11);
  CHECK(again[4].traces == sweep[4].traces);
  CHECK_THROWS_AS(perturb_sweep(agent, *world, base, 3, deltas, 0.5, 3, 11), DimensionError);

  const auto csv = perturb_traces_csv(sweep);
  CHECK(csv.rfind("delta,rollout,t,x,y\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 * 3 * 25);
  const auto svg = perturb_traces_svg(sweep, "sweep");
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 15);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("monotone_returns and scatter plot") {
  auto rec = [](double d, double r) {
    PerturbRecord p;
    p.delta = d;
    p.mean_return = r;
    return p;
  };
  CHECK(monotone_returns({rec(1, 3), rec(-1, 1), rec(0, 2)}));
  CHECK(monotone_returns({rec(-1, 3), rec(0, 2), rec(1, 1)}));
  CHECK(!monotone_returns({rec(-1, 1), rec(0, 3), rec(1, 2)}));
  CHECK(!monotone_returns({rec(0, 1)}));

  const auto svg = scatter_svg(Tensor::matrix({{0, 0}, {1, 1}, {2, 0}}), {0, 1, 1}, "pca");
  CHECK(std::count(svg.begin(), svg.end(), '\n') == 3 + 3 + 2 + 1);
  CHECK_THROWS_AS(scatter_svg(Tensor::matrix({{0, 0}}), {0, 1}, "bad"), DimensionError);
}

TEST_CASE("assign_nearest matches the serial reference and breaks ties low") {
  Rng rng(44);
  const Tensor points = rng.normal_tensor(500, 4), centroids = rng.normal_tensor(7, 4);
  std::vector<std::size_t> fast, slow;
  CHECK(assign_nearest(points, centroids, fast));
  CHECK(reference::assign_nearest(points, centroids, slow));
  CHECK(fast == slow);
  CHECK(!assign_nearest(points, centroids, fast));
  std::vector<std::size_t> tie;
  assign_nearest(Tensor::matrix({{0.0}}), Tensor::matrix({{-1.0}, {1.0}}), tie);
  CHECK(tie == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(assign_nearest(points, Tensor::zeros(2, 3), fast), DimensionError);
}
