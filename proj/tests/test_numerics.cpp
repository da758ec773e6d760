#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "gradcheck.hpp"
#include "traj/error.hpp"
#include "traj/io/binary.hpp"
#include "traj/num/adam.hpp"
#include "traj/num/checkpoint.hpp"
#include "traj/num/kernels.hpp"
#include "traj/num/nn.hpp"
#include "traj/num/ops.hpp"
#include "traj/num/rng.hpp"

using namespace traj;
using namespace traj::num;

namespace {

Parameter random_param(const char* name, std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Parameter(name, rng.uniform_tensor(r, c, lo, hi));
}

// Reduces an arbitrary-shaped output to a scalar with fixed random weights so
// every output entry contributes a distinct gradient.
Var weighted_sum(Graph& g, Var y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(y * g.constant(rng.uniform_tensor(y.rows(), y.cols(), -1.0, 1.0)));
}

}  // namespace

TEST_CASE("forward: identity and hand-evaluated compositions") {
  Graph g;
  Var x = g.constant(Tensor::row({1.0, 2.0}));
  CHECK(x.value() == Tensor::row({1.0, 2.0}));

  Rng rng(1);
  Mlp one("m", {2, 2}, Activation::Tanh, Activation::Tanh, rng);
  one.layers[0].weight.value = Tensor::matrix({{1, 0}, {0, 1}});
  one.layers[0].bias.value.fill(0.0);
  Var y = one(g, g.constant(Tensor::row({0.0, 0.0})));
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 0.0);

  Mlp two("m2", {1, 2, 1}, Activation::Tanh, Activation::Identity, rng);
  two.layers[0].weight.value = Tensor::matrix({{2.0, -1.0}});
  two.layers[0].bias.value = Tensor::matrix({{0.1, 0.2}});
  two.layers[1].weight.value = Tensor::matrix({{1.0}, {3.0}});
  two.layers[1].bias.value = Tensor::matrix({{0.5}});
  const double expected = std::tanh(2.0 * 0.5 + 0.1) * 1.0 + std::tanh(-1.0 * 0.5 + 0.2) * 3.0 + 0.5;
  CHECK(two(g, g.constant(Tensor::scalar(0.5))).value().item() == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("Mlp parameter count is sum of in*out + out") {
  Rng rng(2);
  Mlp m("m", {5, 7, 3, 2}, Activation::Relu, Activation::Identity, rng);
  CHECK(m.parameter_count() == 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
  std::vector<Parameter*> ps;
  m.collect(ps);
  CHECK(count_parameters(ps) == m.parameter_count());
}

TEST_CASE("backward basics and lifecycle errors") {
  {
    Graph g;
    Var x = g.variable(Tensor::scalar(3.0));
    g.backward(x);
    CHECK(g.grad(x).item() == 1.0);
  }
  {
    Graph g;
    Var x = g.variable(Tensor::scalar(3.0));
    Var y = square(x);
    g.backward(y);
    CHECK(g.grad(x).item() == 6.0);
    CHECK_THROWS_AS(g.backward(y), StateError);
  }
  {
    Graph g;
    Var x;
    CHECK_THROWS_AS(g.backward(x), StateError);
  }
  {
    // fan-out accumulates: d/dx (x*x + x) = 2x + 1
    Graph g;
    Var x = g.variable(Tensor::scalar(2.0));
    g.backward(x * x + x);
    CHECK(g.grad(x).item() == 5.0);
  }
}

TEST_CASE("non-finite outputs raise NumericError naming the op") {
  Graph g;
  Var x = g.variable(Tensor::scalar(1000.0));
  try {
    exp(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.op() == "exp");
    CHECK(e.node_id() == 1);
  }
  CHECK_THROWS_AS(log(g.constant(Tensor::scalar(-1.0))), NumericError);
}

TEST_CASE("shape mismatches raise DimensionError") {
  Graph g;
  Var a = g.constant(Tensor::zeros(2, 3));
  Var b = g.constant(Tensor::zeros(3, 2));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_NOTHROW(matmul(a, b));
}

TEST_CASE("every differentiable op matches central differences at 10 random points") {
  using Builder = std::function<Var(Graph&, Var, Var)>;
  struct Case {
    const char* name;
    std::size_t ar, ac, br, bc;
    Builder build;
    double lo = -1.0, hi = 1.0;
  };
  const AttentionShape causal{2, 3, 4, 2, true};
  const AttentionShape full{2, 3, 4, 2, false};
  std::vector<Case> cases = {
      {"add", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return add(a, b); }},
      {"sub", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return sub(a, b); }},
      {"mul", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return mul(a, b); }},
      {"div", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return div(a, add_scalar(square(b), 0.5)); }},
      {"add_row", 3, 4, 1, 4, [](Graph&, Var a, Var b) { return add_row(a, b); }},
      {"mul_row", 3, 4, 1, 4, [](Graph&, Var a, Var b) { return mul_row(a, b); }},
      {"add_col", 3, 4, 3, 1, [](Graph&, Var a, Var b) { return add_col(a, b); }},
      {"mul_col", 3, 4, 3, 1, [](Graph&, Var a, Var b) { return mul_col(a, b); }},
      {"mul_scalar", 1, 1, 3, 4, [](Graph&, Var a, Var b) { return mul_scalar(a, b); }},
      {"matmul", 3, 4, 4, 2, [](Graph&, Var a, Var b) { return matmul(a, b); }},
      {"matmul_nt", 3, 4, 2, 4, [](Graph&, Var a, Var b) { return matmul_nt(a, b); }},
      {"transpose", 3, 4, 1, 1, [](Graph&, Var a, Var) { return transpose(a); }},
      {"tanh", 3, 4, 1, 1, [](Graph&, Var a, Var) { return tanh(a); }},
      {"sigmoid", 3, 4, 1, 1, [](Graph&, Var a, Var) { return sigmoid(scale(a, 3.0)); }},
      {"log_sigmoid", 3, 4, 1, 1, [](Graph&, Var a, Var) { return log_sigmoid(scale(a, 3.0)); }},
      {"softplus", 3, 4, 1, 1, [](Graph&, Var a, Var) { return softplus(scale(a, 3.0)); }},
      {"exp", 3, 4, 1, 1, [](Graph&, Var a, Var) { return exp(a); }},
      {"log", 3, 4, 1, 1, [](Graph&, Var a, Var) { return log(a); }, 0.2, 2.0},
      {"square", 3, 4, 1, 1, [](Graph&, Var a, Var) { return square(a); }},
      {"relu", 3, 4, 1, 1, [](Graph&, Var a, Var) { return relu(a); }},
      {"clamp", 3, 4, 1, 1, [](Graph&, Var a, Var) { return clamp(a, -0.5, 0.5); }},
      {"sum", 3, 4, 1, 1, [](Graph&, Var a, Var) { return sum(a); }},
      {"mean", 3, 4, 1, 1, [](Graph&, Var a, Var) { return mean(a); }},
      {"sum_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return sum_rows(a); }},
      {"mean_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return mean_rows(a); }},
      {"sum_cols", 3, 4, 1, 1, [](Graph&, Var a, Var) { return sum_cols(a); }},
      {"segment_mean", 6, 4, 1, 1, [](Graph&, Var a, Var) { return segment_mean(a, 3); }},
      {"softmax", 3, 4, 1, 1, [](Graph&, Var a, Var) { return softmax_rows(scale(a, 3.0)); }},
      {"log_softmax", 3, 4, 1, 1, [](Graph&, Var a, Var) { return log_softmax_rows(scale(a, 3.0)); }},
      {"layer_norm", 3, 4, 2, 4,
       [](Graph&, Var a, Var b) { return layer_norm_rows(a, slice_rows(b, 0, 1), slice_rows(b, 1, 1)); }},
      {"concat_cols", 3, 4, 3, 2, [](Graph&, Var a, Var b) { return concat_cols({a, b, a}); }},
      {"concat_rows", 3, 4, 2, 4, [](Graph&, Var a, Var b) { return concat_rows({b, a}); }},
      {"slice_cols", 3, 4, 1, 1, [](Graph&, Var a, Var) { return slice_cols(a, 1, 2); }},
      {"slice_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return slice_rows(a, 1, 2); }},
      {"gather_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return gather_rows(a, {2, 0, 2, 1}); }},
      {"reshape", 3, 4, 1, 1, [](Graph&, Var a, Var) { return reshape(a, 2, 6); }},
      {"repeat_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return repeat_rows(a, 3); }},
      {"tile_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return tile_rows(a, 2); }},
      {"group_vecmat", 2, 3, 6, 4, [](Graph&, Var a, Var b) { return group_vecmat(a, b); }},
      {"attention_causal", 6, 4, 6, 4,
       [causal](Graph&, Var a, Var b) { return attention(a, b, tanh(a + b), causal); }},
      {"attention_full", 6, 4, 6, 4, [full](Graph&, Var a, Var b) { return attention(b, a, mul(a, b), full); }},
      {"gumbel_softmax", 3, 4, 1, 1,
       [](Graph&, Var a, Var) {
         Rng noise_rng(9);
         return gumbel_softmax(a, 0.7, noise_rng.gumbel_tensor(3, 4));
       }},
  };
  for (const Case& c : cases) {
    for (int point = 0; point < 10; ++point) {
      Rng rng(derive_seed(100, static_cast<std::uint64_t>(point)));
      Parameter a = random_param("a", c.ar, c.ac, rng, c.lo, c.hi);
      Parameter b = random_param("b", c.br, c.bc, rng, c.lo, c.hi);
      if (std::string(c.name) == "relu" || std::string(c.name) == "clamp") {
        // keep inputs away from the kinks
        for (double& v : a.value.data()) v += (v > 0 ? 0.05 : -0.05) + (std::abs(std::abs(v) - 0.5) < 0.05 ? 0.1 : 0.0);
      }
      auto loss = [&](Graph& g) { return weighted_sum(g, c.build(g, g.parameter(a), g.parameter(b)), 7); };
      const auto result = testing::check_gradients(loss, {&a, &b});
      INFO(c.name << " point " << point << " worst " << result.worst);
      CHECK(result.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("Mlp and transformer gradients match central differences") {
  Rng rng(3);
  Mlp m("m", {3, 5, 4, 2}, Activation::Tanh, Activation::Identity, rng);
  Tensor x = rng.normal_tensor(4, 3);
  std::vector<Parameter*> ps;
  m.collect(ps);
  auto r1 = testing::check_gradients([&](Graph& g) { return weighted_sum(g, m(g, g.constant(x)), 3); }, ps);
  INFO(r1.worst);
  CHECK(r1.max_rel_error < 1e-4);

  SequenceEncoder enc("enc", 3, 8, 2, 1, 6, rng);
  Tensor seq = rng.normal_tensor(2 * 5, 3);
  std::vector<Parameter*> eps;
  enc.collect(eps);
  for (bool causal : {false, true}) {
    auto r2 = testing::check_gradients(
        [&](Graph& g) { return weighted_sum(g, enc(g, g.constant(seq), 2, 5, causal), 5); }, eps, 1e-5, 12);
    INFO(r2.worst);
    CHECK(r2.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax is stable and produces simplex rows") {
  Graph g;
  auto s = softmax_rows(g.constant(Tensor::row({0.0, 0.0}))).value();
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
  auto big = softmax_rows(g.constant(Tensor::row({1000.0, 0.0}))).value();
  CHECK(std::abs(big[0] - 1.0) < 1e-9);
  CHECK(std::abs(big[1]) < 1e-9);
  auto lbig = log_softmax_rows(g.constant(Tensor::row({1000.0, 0.0}))).value();
  CHECK(lbig[1] == doctest::Approx(-1000.0));

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = rng.uniform_tensor(5, 7, -1e3, 1e3);
    Tensor p = softmax_rows(g.constant(logits)).value();
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0.0;
      for (double v : p.row_span(r)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("attention with identical keys averages the values") {
  Rng rng(5);
  const AttentionShape shape{1, 4, 4, 2, false};
  Tensor q = rng.normal_tensor(4, 4);
  Tensor k = Tensor::zeros(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 4; ++c) k(i, c) = 0.3 * static_cast<double>(c) - 0.2;
  }
  Tensor v = rng.normal_tensor(4, 4);
  Graph g;
  Tensor out = attention(g.constant(q), g.constant(k), g.constant(v), shape).value();
  for (std::size_t c = 0; c < 4; ++c) {
    double mean_v = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean_v += v(i, c) / 4.0;
    for (std::size_t i = 0; i < 4; ++i) CHECK(out(i, c) == doctest::Approx(mean_v).epsilon(1e-12));
  }
}

TEST_CASE("attention weights per query sum to one; parallel kernels equal the serial reference") {
  Rng rng(6);
  for (bool causal : {false, true}) {
    const AttentionShape s{3, 7, 8, 2, causal};
    Tensor q = rng.normal_tensor(21, 8), k = rng.normal_tensor(21, 8), v = rng.normal_tensor(21, 8);
    Tensor dout = rng.normal_tensor(21, 8);
    std::vector<double> p1(3 * 2 * 49), p2(3 * 2 * 49), o1(21 * 8), o2(21 * 8);
    kernels::attention_forward(s, q.data().data(), k.data().data(), v.data().data(), p1.data(), o1.data());
    reference::attention_forward(s, q.data().data(), k.data().data(), v.data().data(), p2.data(), o2.data());
    for (std::size_t row = 0; row < 3 * 2 * 7; ++row) {
      const double total = std::accumulate(p1.begin() + static_cast<long>(row * 7),
                                           p1.begin() + static_cast<long>(row * 7 + 7), 0.0);
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-12));
    std::vector<double> a1(21 * 8, 0.0), b1(21 * 8, 0.0), c1(21 * 8, 0.0);
    std::vector<double> a2(21 * 8, 0.0), b2(21 * 8, 0.0), c2(21 * 8, 0.0);
    kernels::attention_backward(s, q.data().data(), k.data().data(), v.data().data(), p1.data(), dout.data().data(),
                                a1.data(), b1.data(), c1.data());
    reference::attention_backward(s, q.data().data(), k.data().data(), v.data().data(), p2.data(), dout.data().data(),
                                  a2.data(), b2.data(), c2.data());
    for (std::size_t i = 0; i < a1.size(); ++i) {
      CHECK(a1[i] == doctest::Approx(a2[i]).epsilon(1e-10));
      CHECK(b1[i] == doctest::Approx(b2[i]).epsilon(1e-10));
      CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("parallel gemm matches the reference and is independent of thread count") {
  Rng rng(7);
  const std::size_t m = 64, k = 48, n = 80;
  Tensor a = rng.normal_tensor(m, k), b = rng.normal_tensor(k, n), bt = rng.normal_tensor(n, k), at = rng.normal_tensor(k, m);
  std::vector<double> c1(m * n), c2(m * n), c4(m * n);
  reference::gemm_nn(m, k, n, a.data().data(), b.data().data(), c1.data(), false);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), c2.data(), false);
  omp_set_num_threads(4);
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), c4.data(), false);
  omp_set_num_threads(saved);
  CHECK(c2 == c4);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));

  reference::gemm_nt(m, k, n, a.data().data(), bt.data().data(), c1.data(), false);
  kernels::gemm_nt(m, k, n, a.data().data(), bt.data().data(), c2.data(), false);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
  reference::gemm_tn(m, k, n, at.data().data(), b.data().data(), c1.data(), true);
  kernels::gemm_tn(m, k, n, at.data().data(), b.data().data(), c2.data(), true);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
}

TEST_CASE("adam step examples") {
  {
    Parameter p("w", Tensor::row({1.0, -2.0}));
    Adam opt({.lr = 0.1});
    opt.step({&p});
    CHECK(p.value == Tensor::row({1.0, -2.0}));
    CHECK(opt.steps() == 1);
  }
  {
    // t=1: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    Parameter p("w", Tensor::scalar(0.0));
    p.grad = Tensor::scalar(1.0);
    Adam opt({.lr = 0.1});
    opt.step({&p});
    CHECK(p.value.item() == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  {
    Parameter p("w", Tensor::scalar(0.0));
    Adam opt({.lr = 0.05});
    for (int i = 0; i < 500; ++i) {
      p.zero_grad();
      Graph g;
      g.backward(square(add_scalar(g.parameter(p), -3.0)));
      opt.step({&p});
    }
    CHECK(std::abs(p.value.item() - 3.0) < 1e-2);
  }
  {
    Parameter a("a", Tensor::zeros(2, 2));
    Parameter b("b", Tensor::zeros(3, 1));
    Adam opt;
    opt.step({&a});
    CHECK_THROWS_AS(opt.step({&b}), DimensionError);
  }
}

TEST_CASE("adam is bit-deterministic under identical gradient streams") {
  auto run = [] {
    Rng rng(11);
    Mlp m("m", {3, 8, 1}, Activation::Tanh, Activation::Identity, rng);
    std::vector<Parameter*> ps;
    m.collect(ps);
    Adam opt({.lr = 0.01});
    Rng data(12);
    for (int step = 0; step < 50; ++step) {
      zero_grads(ps);
      Graph g;
      Tensor x = data.normal_tensor(8, 3);
      g.backward(mean(square(m(g, g.constant(x)))));
      opt.step(ps);
    }
    std::vector<Tensor> out;
    for (auto* p : ps) out.push_back(p->value);
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("gumbel softmax examples and limits") {
  Graph g;
  Tensor logits = Tensor::row({0.3, -1.2, 2.0});
  Tensor zero = Tensor::zeros(1, 3);
  Tensor soft = gumbel_softmax(g.constant(logits), 0.5, zero).value();
  Tensor ref = softmax_rows(g.constant(Tensor::row({0.6, -2.4, 4.0}))).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(soft[i] == doctest::Approx(ref[i]).epsilon(1e-15));

  for (double tau : {0.1, 1.0, 10.0}) {
    Tensor u = gumbel_softmax(g.constant(Tensor::row({1.5, 1.5, 1.5, 1.5})), tau, Tensor::zeros(1, 4)).value();
    for (double v : u.data()) CHECK(v == doctest::Approx(0.25));
  }
  Tensor sharp = gumbel_softmax(g.constant(Tensor::row({2.0, 0.0})), 0.1, Tensor::zeros(1, 2)).value();
  CHECK(std::abs(sharp[0] - 1.0) < 1e-8);
  CHECK(std::abs(sharp[1]) < 1e-8);

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor l = rng.normal_tensor(1, 5);
    Tensor noise = rng.gumbel_tensor(1, 5);
    Tensor hot = gumbel_softmax(g.constant(l), 1e-3, noise).value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < 5; ++i) {
      if (l[i] + noise[i] > l[best] + noise[best]) best = i;
    }
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(hot[i] - (i == best ? 1.0 : 0.0)) < 1e-6);
  }
  CHECK_THROWS_AS(gumbel_softmax(g.constant(logits), 0.0, zero), Error);
  CHECK_THROWS_AS(gumbel_softmax(g.constant(logits), -1.0, zero), Error);

  // straight-through: one-hot forward, soft gradient
  Graph g2;
  Var lv = g2.variable(Tensor::row({0.4, 0.1}));
  Var st = gumbel_softmax(lv, 1.0, Tensor::zeros(1, 2), true);
  CHECK(st.value() == Tensor::row({1.0, 0.0}));
  g2.backward(slice_cols(st, 0, 1));
  const double p0 = 1.0 / (1.0 + std::exp(-0.3));
  CHECK(g2.grad(lv)[0] == doctest::Approx(p0 * (1 - p0)));
}

TEST_CASE("checkpoint round trip and corruption") {
  TensorMap map;
  Rng rng(14);
  map["a/w"] = rng.normal_tensor(3, 4);
  map["b"] = Tensor::scalar(-0.0);
  map["c"] = Tensor({2, 1, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::string bytes = encode_checkpoint(map);
  CHECK(decode_checkpoint(bytes) == map);
  CHECK(bytes.substr(0, 8) == "TRJCKPT1");

  std::string truncated = bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(decode_checkpoint(truncated), ParseError);
  std::string bad_len = bytes;
  bad_len[16] = '\x7f';  // first section name length
  try {
    decode_checkpoint(bad_len);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }

  Mlp m("m", {2, 3}, Activation::Tanh, Activation::Tanh, rng);
  std::vector<Parameter*> ps;
  m.collect(ps);
  TensorMap saved;
  store_parameters(saved, "x/", ps);
  Mlp other("m", {2, 3}, Activation::Tanh, Activation::Tanh, rng);
  std::vector<Parameter*> qs;
  other.collect(qs);
  load_parameters(saved, "x/", qs);
  CHECK(other.layers[0].weight.value == m.layers[0].weight.value);
  CHECK_THROWS_AS(load_parameters(saved, "y/", qs), MissingArtifactError);
}

TEST_CASE("gradient checker skips kinks and nothing else") {
  Parameter p("p", Tensor::row({0.0, 0.5, -0.5}));
  auto relu_sum = [&](Graph& g) { return sum(relu(g.parameter(p))); };
  auto check = testing::check_gradients(relu_sum, {&p});
  CHECK(check.kinks == 1);
  CHECK(check.checked == 2);
  CHECK(check.max_rel_error < 1e-8);

  Parameter q("q", Tensor::row({0.0, 0.5, -0.5}));
  auto smooth = testing::check_gradients([&](Graph& g) { return sum(square(g.parameter(q))); }, {&q});
  CHECK(smooth.kinks == 0);
  CHECK(smooth.checked == 3);
  CHECK(smooth.max_rel_error < 1e-8);
}
