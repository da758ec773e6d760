#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "traj/env/dataset.hpp"
#include "traj/error.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/hssm/skills.hpp"
#include "traj/hssm/train.hpp"
#include "traj/log.hpp"
#include "traj/num/ops.hpp"
#include "traj/vte/train.hpp"

using namespace traj;
using namespace traj::num;

namespace {

vte::VteConfig tiny_vte() {
  vte::VteConfig c;
  c.annotation_width = 4;
  c.hidden = 8;
  c.heads = 2;
  c.blocks = 1;
  c.max_length = 40;
  c.embedding_dim = 3;
  c.policy_hidden = {8};
  return c;
}

hssm::SkillAnnotation random_annotation(std::size_t T, std::size_t l, Rng& rng) {
  hssm::SkillAnnotation a;
  a.z_logits = Tensor::zeros(T, l);
  a.m_logits = Tensor::zeros(T, 2);
  for (std::size_t t = 0; t < T; ++t) {
    double total = 0.0;
    std::vector<double> p(l);
    for (auto& v : p) total += (v = rng.uniform(0.05, 1.0));
    for (std::size_t k = 0; k < l; ++k) a.z_logits(t, k) = std::log(p[k] / total);
    const double q = rng.uniform(0.01, 0.99);
    a.m_logits(t, 0) = std::log(1 - q);
    a.m_logits(t, 1) = std::log(q);
  }
  return a;
}

vte::SquashedGaussianPolicy unit_policy(std::size_t state_dim, std::size_t cond_dim, double bound, Rng& rng) {
  vte::SquashedGaussianPolicy p("p", state_dim, cond_dim, {-bound}, {bound}, {4}, rng);
  p.body.layers.back().zero();
  p.log_std_param.value.fill(0.0);
  return p;
}

env::AbilityDataset small_dataset(std::size_t per_level, std::size_t horizon, std::uint64_t seed) {
  return env::generate_dataset(env::default_spec("waypoint2d", horizon), 3, per_level, seed);
}

std::vector<hssm::SkillAnnotation> annotations_for(const env::AbilityDataset& data, std::size_t l, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<hssm::SkillAnnotation> out;
  for (const auto& tr : data.trajectories) out.push_back(random_annotation(tr.length(), l, rng));
  return out;
}

}  // namespace

TEST_CASE("untrained encoder outputs the prior and sampling is reproducible") {
  Rng rng(1);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  const auto ann = random_annotation(10, 3, rng);
  const auto e = vte::encode(enc, ann, 42);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(e.mu[k] == 0.0);
    CHECK(e.sigma[k] == 1.0);
    CHECK(e.sample[k] == e.mu[k] + e.sigma[k] * e.noise[k]);
  }
  const auto again = vte::encode(enc, ann, 42);
  CHECK(e.sample == again.sample);
  CHECK(vte::encode(enc, ann, 43).sample != e.sample);
}

TEST_CASE("encoder rejects annotations beyond positional capacity") {
  Rng rng(1);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  CHECK_THROWS_AS(vte::encode(enc, random_annotation(41, 3, rng), 1), DimensionError);
  CHECK_THROWS_AS(vte::encode(enc, random_annotation(5, 4, rng), 1), DimensionError);
}

TEST_CASE("mean_pool_embed examples and permutation invariance") {
  hssm::SkillAnnotation a;
  a.z_logits = Tensor::matrix({{0.2, 0.7}, {0.2, 0.7}, {0.2, 0.7}});
  a.m_logits = Tensor::zeros(3, 2);
  const auto constant = vte::mean_pool_embed(a);
  CHECK(constant[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(constant[1] == doctest::Approx(0.7).epsilon(1e-15));
  a.z_logits = Tensor::matrix({{1, 0}, {0, 1}});
  a.m_logits = Tensor::zeros(2, 2);
  CHECK(vte::mean_pool_embed(a) == std::vector<double>{0.5, 0.5});

  Rng rng(3);
  const auto b = random_annotation(8, 3, rng);
  hssm::SkillAnnotation shuffled = b;
  const auto perm = rng.permutation(8);
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t k = 0; k < 3; ++k) shuffled.z_logits(t, k) = b.z_logits(perm[t], k);
  }
  const auto x = vte::mean_pool_embed(b), y = vte::mean_pool_embed(shuffled);
  for (std::size_t k = 0; k < 3; ++k) CHECK(x[k] == doctest::Approx(y[k]).epsilon(1e-14));

  CHECK_THROWS_AS(vte::mean_pool_embed(hssm::SkillAnnotation{}), Error);
}

TEST_CASE("encoder is order sensitive where mean pooling is not") {
  log::set_level(log::Level::Quiet);
  auto data = small_dataset(2, 12, 4);
  auto anns = annotations_for(data, 3, 9);
  Rng rng(2);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 3, data.spec.action_low, data.spec.action_high, {8},
                                     rng);
  vte::VteTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 3;
  cfg.lr = 1e-2;
  vte::train_vte(enc, policy, data, anns, cfg, 1);

  const auto& a = anns[0];
  hssm::SkillAnnotation reversed = a;
  for (std::size_t t = 0; t < 12; ++t) {
    for (std::size_t k = 0; k < 3; ++k) reversed.z_logits(t, k) = a.z_logits(11 - t, k);
    for (std::size_t k = 0; k < 2; ++k) reversed.m_logits(t, k) = a.m_logits(11 - t, k);
  }
  const auto mu = vte::encode(enc, a, 0).mu, mu_rev = vte::encode(enc, reversed, 0).mu;
  double diff = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) diff += (mu[k] - mu_rev[k]) * (mu[k] - mu_rev[k]);
  CHECK(std::sqrt(diff) > 0.0);
  const auto p = vte::mean_pool_embed(a), p_rev = vte::mean_pool_embed(reversed);
  for (std::size_t k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(p_rev[k]).epsilon(1e-14));
  log::set_level(log::Level::Warn);
}

TEST_CASE("kld_to_prior closed-form examples") {
  CHECK(vte::kld_to_prior(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}) == 0.0);
  CHECK(vte::kld_to_prior(std::vector<double>{1}, std::vector<double>{1}) == doctest::Approx(0.5).epsilon(1e-15));
  const double e = std::numbers::e;
  CHECK(vte::kld_to_prior(std::vector<double>{0}, std::vector<double>{std::sqrt(e)}) ==
        doctest::Approx((e - 2.0) / 2.0).epsilon(1e-14));
  CHECK((e - 2.0) / 2.0 == doctest::Approx(0.3591).epsilon(1e-4));
  CHECK_THROWS_AS(vte::kld_to_prior(std::vector<double>{0}, std::vector<double>{0}), Error);
  CHECK_THROWS_AS(vte::kld_to_prior(std::vector<double>{0}, std::vector<double>{-1}), Error);

  Graph g;
  Var mu = g.constant(Tensor::matrix({{1.0}, {0.0}}));
  Var lv = g.constant(Tensor::matrix({{0.0}, {1.0}}));
  const Tensor k = vte::kld_to_prior(mu, lv).value();
  CHECK(k[0] == doctest::Approx(0.5));
  CHECK(k[1] == doctest::Approx((e - 2.0) / 2.0));
}

TEST_CASE("kld_to_prior is non-negative and vanishes only at the prior") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const std::size_t d = 1 + rng.index(5);
    std::vector<double> mu(d), sigma(d);
    for (std::size_t k = 0; k < d; ++k) {
      mu[k] = rng.uniform(-3, 3);
      sigma[k] = std::exp(rng.uniform(-3, 3));
    }
    const double kl = vte::kld_to_prior(mu, sigma);
    CHECK(kl > 0.0);
  }
  CHECK(std::abs(vte::kld_to_prior(std::vector<double>{0, 0}, std::vector<double>{1, 1})) <= 1e-12);
  CHECK(vte::kld_to_prior(std::vector<double>{1e-4}, std::vector<double>{1}) > 0.0);
}

TEST_CASE("kld_to_prior matches a Monte Carlo estimate") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double mu = rng.uniform(-1, 1), sigma = std::exp(rng.uniform(-0.5, 0.5));
    CHECK(std::abs(testing::kld_monte_carlo(mu, sigma, 100000, rng) -
                   vte::kld_to_prior(std::vector<double>{mu}, std::vector<double>{sigma})) < 0.01);
  }
}

TEST_CASE("reparameterized sample has identity and noise Jacobians") {
  Graph g;
  Var mu = g.variable(Tensor::row({0.3, -1.2}));
  Var sigma = g.variable(Tensor::row({0.5, 2.0}));
  const Tensor eps = Tensor::row({0.7, -0.4});
  Var sample = mu + g.constant(eps) * sigma;
  g.backward(sum(sample));
  CHECK(g.grad(mu) == Tensor::row({1.0, 1.0}));
  CHECK(g.grad(sigma) == eps);
}

TEST_CASE("reconstruction loss: unit Gaussian head at zero action") {
  Rng rng(1);
  const Tensor states = Tensor::matrix({{0.4}}), actions = Tensor::matrix({{0.0}});
  env::StateActionView view(states, actions);
  for (double bound : {1.0, 2.0}) {
    auto policy = unit_policy(1, 1, bound, rng);
    Graph g;
    const double loss = vte::reconstruction_loss(g, policy, view, g.constant(Tensor::row({0.0}))).value().item();
    // 0.5 log(2 pi) plus the squash correction log(half-width * (1 - 0)).
    CHECK(loss == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi) + std::log(bound)).epsilon(1e-14));
  }
}

TEST_CASE("reconstruction loss at the mode decreases as the std shrinks") {
  Rng rng(2);
  const Tensor states = Tensor::matrix({{0.1}, {0.2}, {0.3}}), actions = Tensor::matrix({{0.0}, {0.0}, {0.0}});
  env::StateActionView view(states, actions);
  auto policy = unit_policy(1, 1, 1.0, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double ls : {0.0, -1.0, -2.0, -4.0}) {
    policy.log_std_param.value.fill(ls);
    Graph g;
    const double loss = vte::reconstruction_loss(g, policy, view, g.constant(Tensor::row({0.0}))).value().item();
    CHECK(loss == doctest::Approx(3.0 * (0.5 * std::log(2.0 * std::numbers::pi) + ls)).epsilon(1e-12));
    CHECK(loss < previous);
    previous = loss;
  }
  // The log-std is clamped, so the limit is finite.
  policy.log_std_param.value.fill(-50.0);
  Graph g;
  CHECK(vte::reconstruction_loss(g, policy, view, g.constant(Tensor::row({0.0}))).value().item() ==
        doctest::Approx(3.0 * (0.5 * std::log(2.0 * std::numbers::pi) + vte::kLogStdMin)));
}

TEST_CASE("reconstruction loss clamps recorded actions on the bounds") {
  log::set_level(log::Level::Quiet);
  Rng rng(2);
  const Tensor states = Tensor::matrix({{0.1}}), actions = Tensor::matrix({{1.0}});
  auto policy = unit_policy(1, 1, 1.0, rng);
  Graph g;
  const double loss =
      vte::reconstruction_loss(g, policy, env::StateActionView(states, actions), g.constant(Tensor::row({0.0})))
          .value()
          .item();
  CHECK(std::isfinite(loss));
  log::set_level(log::Level::Warn);
}

TEST_CASE("sequence log-likelihood and behavior cloning share their policy gradient") {
  const auto data = small_dataset(1, 10, 3);
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    CHECK(testing::sequence_vs_bc_gradient_gap(data, i, 5 + i) <= 1e-10);
  }
}

TEST_CASE("vte_loss: prior encoder with no KL weight is the scaled BC loss") {
  auto data = small_dataset(1, 8, 3);
  Rng rng(4);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 3, data.spec.action_low, data.spec.action_high, {6},
                                     rng);
  auto anns = annotations_for(data, 3, 2);
  std::vector<const hssm::SkillAnnotation*> batch{&anns[0], &anns[1]};
  std::vector<env::StateActionView> views{data.trajectories[0].view(), data.trajectories[1].view()};
  Graph g;
  auto terms = vte::vte_loss(g, enc, policy, batch, views, {.bc_alpha = 0.5, .kld_alpha = 0.0}, 77);
  CHECK(terms.kld.value().item() == 0.0);
  Rng noise(77);
  const Tensor eps = noise.normal_tensor(2, 3);
  double bc = 0.0;
  for (std::size_t b = 0; b < 2; ++b) {
    Graph h;
    bc += vte::reconstruction_loss(h, policy, views[b], h.constant(Tensor::row(std::vector<double>(eps.row_span(b).begin(), eps.row_span(b).end())))).value().item();
  }
  CHECK(terms.loss.value().item() == doctest::Approx(0.5 * bc / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(vte::vte_loss(g, enc, policy, batch, views, {.bc_alpha = 0.0, .kld_alpha = 1.0}, 1), Error);
}

TEST_CASE("default loss weights: bc 0.5, KL 1") {
  vte::LossWeights w;
  CHECK(w.bc_alpha == 0.5);
  CHECK(w.kld_alpha == 1.0);
}

TEST_CASE("vte_loss gradients on a two-trajectory batch") {
  auto data = small_dataset(1, 6, 3);
  Rng rng(8);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  // Non-zero heads so gradients reach every encoder parameter.
  enc.mu_head.weight.value = rng.uniform_tensor(8, 3, -0.5, 0.5);
  enc.log_var_head.weight.value = rng.uniform_tensor(8, 3, -0.5, 0.5);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 3, data.spec.action_low, data.spec.action_high, {6},
                                     rng);
  auto anns = annotations_for(data, 3, 5);
  std::vector<const hssm::SkillAnnotation*> batch{&anns[0], &anns[2]};
  std::vector<env::StateActionView> views{data.trajectories[0].view(), data.trajectories[2].view()};
  auto params = enc.parameters();
  policy.collect(params);
  auto check = testing::check_gradients(
      [&](Graph& g) { return vte::vte_loss(g, enc, policy, batch, views, {}, 3).loss; }, params, 1e-5, 8);
  CHECK_MESSAGE(check.max_rel_error < 1e-4, check.worst);
}

TEST_CASE("policy sample gradients and log density") {
  Rng rng(9);
  vte::SquashedGaussianPolicy policy("pi", 3, 2, {-1.0, -2.0}, {1.0, 0.0}, {5}, rng);
  policy.log_std_param.value = Tensor::row({-0.3, 0.2});
  const Tensor states = rng.uniform_tensor(4, 3, -1, 1), cond = rng.uniform_tensor(4, 2, -1, 1);
  const Tensor noise = rng.normal_tensor(4, 2);
  auto check = testing::check_gradients(
      [&](Graph& g) {
        auto s = policy.rsample(g, g.constant(states), g.constant(cond), noise);
        return sum(s.action) + sum(s.log_prob);
      },
      policy.parameters());
  CHECK_MESSAGE(check.max_rel_error < 1e-4, check.worst);

  // The sample's log density agrees with the density of the recorded action.
  Graph g;
  auto s = policy.rsample(g, g.constant(states), g.constant(cond), noise);
  Var lp = policy.log_prob(g, g.constant(states), g.constant(cond), s.action.value());
  for (std::size_t r = 0; r < 4; ++r) CHECK(lp.value()[r] == doctest::Approx(s.log_prob.value()[r]).epsilon(1e-7));
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(s.action.value()(r, 0) > -1.0);
    CHECK(s.action.value()(r, 0) < 1.0);
    CHECK(s.action.value()(r, 1) > -2.0);
    CHECK(s.action.value()(r, 1) < 0.0);
  }
  const auto mean = policy.mean_action(states.row_span(0), cond.row_span(0));
  CHECK(mean.size() == 2);
  CHECK_THROWS_AS(vte::SquashedGaussianPolicy("bad", 1, 0, {1.0}, {0.0}, {2}, rng), Error);
}

TEST_CASE("training: identical trajectories share one embedding; runs are reproducible") {
  log::set_level(log::Level::Quiet);
  auto data = small_dataset(2, 10, 4);
  for (auto& tr : data.trajectories) tr = data.trajectories[0];
  Rng ann_rng(3);
  const auto one = random_annotation(10, 3, ann_rng);
  std::vector<hssm::SkillAnnotation> anns(data.trajectories.size(), one);
  auto run = [&] {
    Rng rng(2);
    vte::VteEncoder enc(tiny_vte(), 3, rng);
    vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 3, data.spec.action_low, data.spec.action_high, {8},
                                       rng);
    vte::VteTrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch = 2;
    return vte::train_vte(enc, policy, data, anns, cfg, 1);
  };
  const auto a = run();
  for (const auto& e : a.embeddings) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(e.mu[k] - a.embeddings[0].mu[k]) < 1e-3);
  }
  const auto b = run();
  for (std::size_t i = 0; i < a.embeddings.size(); ++i) {
    CHECK(a.embeddings[i].mu == b.embeddings[i].mu);
    CHECK(a.embeddings[i].sample == b.embeddings[i].sample);
  }
  CHECK(a.log.size() == 4);
  CHECK(std::isnan(a.log[0].drift));
  log::set_level(log::Level::Warn);
}

TEST_CASE("training stops early once the embeddings stop moving") {
  log::set_level(log::Level::Quiet);
  auto data = small_dataset(2, 8, 4);
  auto anns = annotations_for(data, 3, 1);
  Rng rng(2);
  vte::VteEncoder enc(tiny_vte(), 3, rng);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 3, data.spec.action_low, data.spec.action_high, {8},
                                     rng);
  vte::VteTrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 0.0;  // nothing moves, so the drift is zero once the window fills
  const auto r = vte::train_vte(enc, policy, data, anns, cfg, 1);
  CHECK(r.log.size() == cfg.early_stop_window + 1);
  CHECK(r.log.back().drift == 0.0);
  log::set_level(log::Level::Warn);
}

TEST_CASE("three-level dataset separates into three clusters of embeddings") {
  log::set_level(log::Level::Quiet);
  auto data = small_dataset(10, 40, 6);
  Rng rng(5);
  hssm::HssmConfig hc;
  hc.skills = 4;
  hc.abstraction = 8;
  hc.width = 16;
  hc.heads = 2;
  hc.max_length = 40;
  hc.decoder_hidden = 16;
  hssm::HssmModel skills(hc, data.spec.state_dim, data.spec.action_dim, rng);
  hssm::HssmTrainConfig hcfg;
  hcfg.epochs = 20;
  hcfg.warmup_epochs = 10;
  hcfg.batch = 8;
  hcfg.lr = 3e-3;
  hssm::train_hssm(skills, data, hcfg, 2);

  vte::VteConfig vc = tiny_vte();
  vc.annotation_width = 8;
  vc.hidden = 16;
  vc.embedding_dim = 4;
  vc.policy_hidden = {32, 32};
  vte::VteEncoder enc(vc, hc.skills, rng);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, vc.embedding_dim, data.spec.action_low,
                                     data.spec.action_high, vc.policy_hidden, rng);
  vte::VteTrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch = 4;
  cfg.lr = 3e-3;
  const auto result = vte::train_vte(enc, policy, data, skills, cfg, 3);

  Tensor points = Tensor::zeros(data.trajectories.size(), vc.embedding_dim);
  std::vector<int> truth;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    for (std::size_t k = 0; k < vc.embedding_dim; ++k) points(i, k) = result.embeddings[i].mu[k];
    truth.push_back(data.trajectories[i].eval_labels().ability);
  }
  CHECK(eval::kmeans_hungarian_accuracy(points, truth, 3, 1) >= 0.9);

  const auto csv = vte::embedding_csv(result.embeddings, data);
  CHECK(csv.rfind("trajId,ability,mu_0,mu_1,mu_2,mu_3,sigma_0,sigma_1,sigma_2,sigma_3\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
  log::set_level(log::Level::Warn);
}

TEST_CASE("encoder and policy checkpoints round trip") {
  Rng rng(1);
  vte::VteEncoder a(tiny_vte(), 3, rng), b(tiny_vte(), 3, rng);
  a.mu_head.weight.value = rng.uniform_tensor(8, 3, -1, 1);
  vte::SquashedGaussianPolicy pa("pi", 2, 3, {-1}, {1}, {4}, rng), pb("pi", 2, 3, {-1}, {1}, {4}, rng);
  TensorMap map;
  a.store(map);
  pa.store(map, "vte/policy/");
  const auto restored = decode_checkpoint(encode_checkpoint(map));
  b.load(restored);
  pb.load(restored, "vte/policy/");
  const auto ann = random_annotation(6, 3, rng);
  CHECK(vte::encode(a, ann, 1).mu == vte::encode(b, ann, 1).mu);
  CHECK(pa.body.layers[0].weight.value == pb.body.layers[0].weight.value);
  TensorMap empty;
  CHECK_THROWS_AS(b.load(empty), MissingArtifactError);
}
