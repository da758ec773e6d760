#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "traj/env/env.hpp"
#include "traj/iq/agent.hpp"
#include "traj/num/tensor.hpp"

namespace traj::eval {

struct GroupLabel {
  int level = 0;
  std::size_t replicate = 0;
};

// Symmetric, zero diagonal.
struct DistanceMatrix {
  std::vector<GroupLabel> labels;
  num::Tensor values;

  // Largest entry between distinct groups of one level and smallest entry
  // between groups of different levels; NaN when no such pair exists.
  double max_intra_level() const;
  double min_inter_level() const;
};

// Level l contributes replicates consecutive groups of group_size rows taken
// in order from embeddings.at(l); every pair of groups gets its W1 distance.
DistanceMatrix distance_heatmap(const std::map<int, num::Tensor>& embeddings, std::size_t replicates,
                                std::size_t group_size = 10);

struct PerturbRecord {
  double delta = 0.0;
  std::vector<double> returns;
  double mean_return = 0.0;
  double mean_speed = 0.0;             // |velocity| averaged over steps and rollouts
  double mean_action_magnitude = 0.0;  // |action| averaged likewise
  std::vector<std::vector<std::pair<double, double>>> traces;  // per rollout, planar positions
};

// Rollouts conditioned on base + delta * unit * e_dim for each delta, all
// with the same initial states.
std::vector<PerturbRecord> perturb_sweep(iq::ConditionalAgent& agent, const env::Env& env,
                                         const std::vector<double>& base, std::size_t dim,
                                         const std::vector<double>& deltas, double unit, std::size_t rollouts,
                                         std::uint64_t seed);

// True when mean returns strictly increase or strictly decrease with delta
// (records sorted by delta first).
bool monotone_returns(std::vector<PerturbRecord> records);

}  // namespace traj::eval
