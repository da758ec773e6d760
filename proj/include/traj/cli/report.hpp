#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace traj::cli {

struct Report {
  std::string json_text;
  std::string markdown;
};

// Figures the report links to; produced by eval and perturb.
const std::vector<std::string>& report_figures();

// Aggregates the CSV and JSON artifacts of a finished run. The output depends
// only on file contents, never on paths or timings.
Report build_report(const std::filesystem::path& dir, const std::string& experiment_hash);

}  // namespace traj::cli
