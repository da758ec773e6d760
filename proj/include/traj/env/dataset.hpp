#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "traj/env/controller.hpp"
#include "traj/env/trajectory.hpp"

namespace traj::env {

struct LevelStats {
  int level = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
};

struct AbilityDataset {
  EnvSpec spec;
  int levels = 0;
  std::vector<Trajectory> trajectories;

  std::vector<LevelStats> level_stats() const;

  friend bool operator==(const AbilityDataset&, const AbilityDataset&) = default;
};

// Trajectories ordered by (level, index); trajectory i of level l (1-based)
// gets id (l-1)*per_level + i. Throws GenerationError naming the first pair of
// adjacent levels whose mean return gap is below min_gap_sigmas pooled stds.
AbilityDataset generate_dataset(const EnvSpec& spec, int levels, std::size_t per_level, std::uint64_t seed,
                                const ControllerBands& bands = {}, double min_gap_sigmas = 3.0);

// Separation check on its own, exposed for tests.
void check_separation(const std::vector<LevelStats>& stats, double min_gap_sigmas);

// .trajset layout, little-endian:
//   8 bytes magic "TRAJSET\0", u32 version (1), u64 header length,
//   header: UTF-8 JSON {env, levels, trajectories: [{id, ability, length}]},
//   payload per trajectory in header order: f64 return label,
//   length*state_dim f64 states, length*action_dim f64 actions.
std::string encode_dataset(const AbilityDataset& d);
AbilityDataset decode_dataset(const std::string& bytes);
void write_dataset(const std::filesystem::path& path, const AbilityDataset& d);
AbilityDataset read_dataset(const std::filesystem::path& path);

}  // namespace traj::env
