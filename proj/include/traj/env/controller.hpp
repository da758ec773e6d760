#pragma once

#include <span>
#include <vector>

#include "traj/env/env.hpp"
#include "traj/num/rng.hpp"

namespace traj::env {

// Controller parameters at the lowest and highest ability level; levels in
// between interpolate linearly.
struct ControllerBands {
  double speed_low = 0.4;
  double speed_high = 1.4;
  double gain_low = 1.0;
  double gain_high = 3.0;
  double noise_low = 0.1;
  double noise_high = 0.02;
};

// a = 0.95 * tanh(gain * (speed * heading - velocity) + noise)
struct ScriptedController {
  int level = 1;
  double speed = 0.0;
  double gain = 0.0;
  double noise_std = 0.0;

  std::vector<double> act(const Env& env, std::span<const double> state, num::Rng& rng) const;
};

ScriptedController scripted_policy(int level, int levels, const EnvSpec& spec, const ControllerBands& bands = {});

}  // namespace traj::env
