#include "traj/env/controller.hpp"

#include <cmath>

#include "traj/error.hpp"

namespace traj::env {

std::vector<double> ScriptedController::act(const Env& env, std::span<const double> state, num::Rng& rng) const {
  const auto dir = env.heading(state);
  const auto vel = env.velocity(state);
  std::vector<double> a(dir.size());
  for (std::size_t i = 0; i < dir.size(); ++i) {
    const double noise = noise_std > 0.0 ? noise_std * rng.normal() : 0.0;
    a[i] = 0.95 * std::tanh(gain * (speed * dir[i] - vel[i]) + noise);
  }
  return a;
}

ScriptedController scripted_policy(int level, int levels, const EnvSpec& spec, const ControllerBands& bands) {
  if (levels < 1 || level < 1 || level > levels) {
    throw GenerationError("ability level " + std::to_string(level) + " outside 1.." + std::to_string(levels));
  }
  const double f = levels == 1 ? 1.0 : static_cast<double>(level - 1) / static_cast<double>(levels - 1);
  ScriptedController c;
  c.level = level;
  c.speed = bands.speed_low + f * (bands.speed_high - bands.speed_low);
  c.gain = bands.gain_low + f * (bands.gain_high - bands.gain_low);
  c.noise_std = bands.noise_low + f * (bands.noise_high - bands.noise_low);
  // Steady-state speed under saturated action: accel * 0.95 / damping.
  const double accel = spec.params.contains("accel") ? spec.param("accel") : 1.0;
  const double top = accel * 0.95 / spec.param("damping");
  if (c.speed <= 0.0 || c.speed >= top) {
    throw GenerationError("target speed " + std::to_string(c.speed) + " for level " + std::to_string(level) +
                          " is not attainable in " + spec.name + " (top speed " + std::to_string(top) + ")");
  }
  if (c.noise_std < 0.0 || c.gain <= 0.0) throw GenerationError("controller band has negative noise or gain");
  return c;
}

}  // namespace traj::env
