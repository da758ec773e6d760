#pragma once

#include <cstdint>
#include <vector>

#include "traj/num/graph.hpp"

namespace traj::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

// Moment buffers are matched to parameters by position, so the same ordered
// parameter list must be passed to every step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Parameter*>& params);

  std::int64_t steps() const { return step_; }
  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::int64_t step_ = 0;
};

double grad_norm(const std::vector<Parameter*>& params);

}  // namespace traj::num
