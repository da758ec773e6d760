#pragma once

#include <string>
#include <vector>

#include "traj/cli/config.hpp"

namespace traj::cli {

// Stage names in execution order.
const std::vector<std::string>& stage_names();

struct StageOutcome {
  std::string stage;
  bool skipped = false;  // inputs, config and outputs matched the manifest
  double seconds = 0.0;
};

// Runs stages against config.out. Each stage checks that its upstream
// artifacts exist, skips itself when nothing changed since the last
// recorded run, and otherwise rewrites its outputs and manifest entry.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  StageOutcome run(const std::string& stage);
  std::vector<StageOutcome> run_all();

  const PipelineConfig& config() const { return config_; }

 private:
  StageOutcome run_locked(const std::string& stage);

  PipelineConfig config_;
};

// Hash of every setting that affects results; the output directory is
// excluded so identical experiments in different directories agree.
std::string experiment_hash(const PipelineConfig& config);

}  // namespace traj::cli
