#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/hssm/model.hpp"

namespace traj::hssm {

struct HssmEpochLog {
  std::size_t epoch = 0;
  double elbo = 0.0;  // mean bound per trajectory
  double info_cost = 0.0;
  double lambda = 0.0;
  double cluster_error = 0.0;
};

struct HssmTrainConfig {
  std::size_t epochs = 40;
  std::size_t warmup_epochs = 8;  // ELBO only; sets the constraint level
  std::size_t batch = 16;
  double lr = 1e-3;
  double tau_start = 1.0;
  double tau_end = 0.3;
  double constraint_slack = 0.05;  // C = warm-up loss + slack * |warm-up loss|
  double dual_step = 0.01;
  double lambda_init = 1.0;
  // When set, the constraint level is fixed instead of taken from warm-up.
  double constraint_override = std::numeric_limits<double>::quiet_NaN();
  // When set, lambda stays at lambda_init.
  bool freeze_lambda = false;
  double early_stop_error = 0.1;
  double divergence_limit = 1e6;
  bool early_stop = true;
  // Called after every epoch with the entry just logged.
  std::function<void(const HssmEpochLog&)> on_epoch;
};


struct HssmTrainResult {
  std::vector<HssmEpochLog> log;
  double constraint = 0.0;
};

HssmTrainResult train_hssm(HssmModel& model, const env::AbilityDataset& data, const HssmTrainConfig& config,
                           std::uint64_t seed);

std::string training_log_csv(const std::vector<HssmEpochLog>& log);

}  // namespace traj::hssm
