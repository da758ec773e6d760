#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "traj/eval/downstream.hpp"
#include "traj/hssm/model.hpp"
#include "traj/hssm/train.hpp"
#include "traj/iq/train.hpp"
#include "traj/vte/encoder.hpp"
#include "traj/vte/train.hpp"

namespace traj::cli {

struct EnvSection {
  std::string name = "waypoint2d";
  int levels = 3;
  std::size_t per_level = 60;
  std::size_t horizon = 100;
  std::uint64_t seed = 7;
};

struct HssmSection {
  hssm::HssmConfig model;
  hssm::HssmTrainConfig train;
};

struct VteSection {
  vte::VteConfig model;
  vte::VteTrainConfig train;
};

struct IqSection {
  iq::AgentConfig agent;
  iq::IqTrainConfig train;
  iq::BcConfig bc;
  std::size_t final_sources_per_level = 10;
  std::size_t final_rollouts = 5;
};

struct EvalSection {
  double test_fraction = 0.3;
  eval::HeadConfig classifier;
  eval::HeadConfig regressor;
  std::size_t heatmap_replicates = 3;
  std::size_t heatmap_group = 10;
  std::vector<double> perturb_deltas = {-2, -1, 0, 1, 2};
  std::size_t perturb_rollouts = 5;
  int perturb_level = 2;  // source trajectory for the base embedding
};

struct PipelineConfig {
  EnvSection env;
  HssmSection hssm;
  VteSection vte;
  IqSection condiq;
  EvalSection eval;
  std::uint64_t seed = 1;
  std::filesystem::path out = "run";
};

// Defaults scaled to a single desktop core; see README for the schema.
PipelineConfig default_config();

// INI text with sections [run], [env], [hssm], [vte], [condiq], [bc], [eval].
// Unknown sections or keys, unparsable values and out-of-range values are
// all reported together in one ConfigError, one line per field.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Every field in schema order, fully resolved. Parsing the result gives back
// an identical config.
std::string canonical_ini(const PipelineConfig& config);
// Canonical text of one section.
std::string section_ini(const PipelineConfig& config, const std::string& section);

}  // namespace traj::cli
