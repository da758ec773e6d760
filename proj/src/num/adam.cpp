#include "traj/num/adam.hpp"

#include <cmath>

#include "traj/error.hpp"

namespace traj::num {

double grad_norm(const std::vector<Parameter*>& params) {
  double total = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data()) total += g * g;
  }
  return std::sqrt(total);
}

void Adam::step(const std::vector<Parameter*>& params) {
  if (first_.empty()) {
    for (const Parameter* p : params) {
      first_.push_back(Tensor::zeros_like(p->value));
      second_.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (params.size() != first_.size()) {
    throw DimensionError("Adam: expected " + std::to_string(first_.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->value.same_shape(first_[i]) || !params[i]->grad.same_shape(first_[i])) {
      throw DimensionError("Adam: parameter '" + params[i]->name + "' shape " + params[i]->value.shape_string() +
                           " does not match its moment buffer " + first_[i].shape_string());
    }
  }
  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = grad_norm(params);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.data();
    auto g = params[i]->grad.data();
    auto m = first_[i].data();
    auto v = second_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      w[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

}  // namespace traj::num
