#include "traj/vte/policy.hpp"

#include <cmath>
#include <numbers>

#include "traj/error.hpp"
#include "traj/log.hpp"

namespace traj::vte {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

constexpr double kEdge = 1.0 - 1e-6;

}  // namespace

SquashedGaussianPolicy::SquashedGaussianPolicy(const std::string& name, std::size_t state_dim, std::size_t cond_dim,
                                               std::vector<double> low, std::vector<double> high,
                                               const std::vector<std::size_t>& hidden, num::Rng& rng)
    : body(name + ".body", layer_sizes(state_dim + cond_dim, hidden, low.size()), num::Activation::Relu,
           num::Activation::Identity, rng),
      log_std_param(name + ".log_std", Tensor(std::vector<std::size_t>{1, low.size()}, -0.5)),
      state_dim_(state_dim),
      cond_dim_(cond_dim) {
  if (low.size() != high.size() || low.empty()) throw DimensionError("policy: action bounds must be non-empty pairs");
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!(high[i] > low[i])) throw Error("policy: action bound high must exceed low");
    center_.push_back(0.5 * (high[i] + low[i]));
    half_.push_back(0.5 * (high[i] - low[i]));
  }
}

Var SquashedGaussianPolicy::pre_mean(Graph& g, Var states, Var cond) {
  if (states.cols() != state_dim_) throw DimensionError("policy: state width mismatch");
  if (cond_dim_ == 0) return body(g, states);
  if (!cond.valid() || cond.cols() != cond_dim_ || cond.rows() != states.rows()) {
    throw DimensionError("policy: conditioning input must be N x " + std::to_string(cond_dim_));
  }
  return body(g, num::concat_cols({states, cond}));
}

Var SquashedGaussianPolicy::log_std(Graph& g) { return num::clamp(g.parameter(log_std_param), kLogStdMin, kLogStdMax); }

Var SquashedGaussianPolicy::log_prob(Graph& g, Var states, Var cond, const Tensor& actions) {
  const std::size_t n = states.rows(), ad = action_dim();
  if (actions.rows() != n || actions.cols() != ad) throw DimensionError("policy: action table shape mismatch");
  Tensor pre = Tensor::zeros(n, ad);
  Tensor jac_rows = Tensor::zeros(n, 1);
  bool clamped = false;
  for (std::size_t r = 0; r < n; ++r) {
    double row_jac = 0.0;
    for (std::size_t k = 0; k < ad; ++k) {
      double y = (actions(r, k) - center_[k]) / half_[k];
      if (std::abs(y) > kEdge) {
        clamped = true;
        y = std::copysign(kEdge, y);
      }
      pre(r, k) = std::atanh(y);
      row_jac += std::log(half_[k] * (1.0 - y * y));
    }
    jac_rows(r, 0) = row_jac;
  }
  if (clamped) log::warn("policy: recorded action at or beyond the bounds clamped before inverse squash");
  Var ls = log_std(g);
  Var z = num::mul_row(g.constant(pre) - pre_mean(g, states, cond), num::exp(num::neg(ls)));
  Var gauss = num::add_col(num::neg(num::scale(num::sum_cols(num::square(z)), 0.5)),
                           g.constant(Tensor(std::vector<std::size_t>{n, 1},
                                             -0.5 * static_cast<double>(ad) * std::log(2.0 * std::numbers::pi))));
  gauss = num::add_col(gauss, num::neg(num::sum_cols(num::tile_rows(ls, n))));
  return gauss - g.constant(jac_rows);
}

Var SquashedGaussianPolicy::squash(Graph& g, Var u) {
  Tensor c = Tensor::zeros(1, action_dim()), h = Tensor::zeros(1, action_dim());
  for (std::size_t k = 0; k < action_dim(); ++k) {
    c[k] = center_[k];
    h[k] = half_[k];
  }
  return num::add_row(num::mul_row(num::tanh(u), g.constant(h)), g.constant(c));
}

SquashedGaussianPolicy::Sample SquashedGaussianPolicy::rsample(Graph& g, Var states, Var cond, const Tensor& noise) {
  const std::size_t n = states.rows(), ad = action_dim();
  if (noise.rows() != n || noise.cols() != ad) throw DimensionError("policy: noise shape mismatch");
  Var ls = log_std(g);
  Var eps = g.constant(noise);
  Var u = pre_mean(g, states, cond) + num::mul_row(eps, num::exp(ls));
  Sample s;
  s.action = squash(g, u);
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  Var log_det = num::scale(num::add_scalar(num::neg(u) - num::softplus(num::scale(u, -2.0)), std::log(2.0)), 2.0);
  double log_half = 0.0;
  for (double h : half_) log_half += std::log(h);
  Var gauss = num::add_scalar(num::neg(num::scale(num::sum_cols(num::square(eps)), 0.5)),
                              -0.5 * static_cast<double>(ad) * std::log(2.0 * std::numbers::pi) - log_half);
  gauss = num::add_col(gauss, num::neg(num::sum_cols(num::tile_rows(ls, n))));
  s.log_prob = gauss - num::sum_cols(log_det);
  return s;
}

Tensor SquashedGaussianPolicy::mean_actions(const Tensor& states, const Tensor& cond) {
  Graph g(false);
  Var c = cond_dim_ == 0 ? Var() : g.constant(cond);
  return squash(g, pre_mean(g, g.constant(states), c)).value();
}

std::vector<double> SquashedGaussianPolicy::mean_action(std::span<const double> state, std::span<const double> cond) {
  Tensor s({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  Tensor c = cond_dim_ == 0 ? Tensor() : Tensor({1, cond.size()}, std::vector<double>(cond.begin(), cond.end()));
  return mean_actions(s, c).row_vector(0);
}

void SquashedGaussianPolicy::collect(std::vector<num::Parameter*>& out) {
  body.collect(out);
  out.push_back(&log_std_param);
}

std::vector<num::Parameter*> SquashedGaussianPolicy::parameters() {
  std::vector<num::Parameter*> out;
  collect(out);
  return out;
}

void SquashedGaussianPolicy::store(num::TensorMap& map, const std::string& prefix) {
  num::store_parameters(map, prefix, parameters());
}

void SquashedGaussianPolicy::load(const num::TensorMap& map, const std::string& prefix) {
  num::load_parameters(map, prefix, parameters());
}

}  // namespace traj::vte
