#include "traj/cli/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "traj/cli/manifest.hpp"
#include "traj/error.hpp"

namespace traj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("report needs " + path.filename().string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Header-keyed rows of a simple comma-separated file.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError("malformed row in " + path.filename().string(), 0);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) { return std::stod(row.at(key)); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pct(double fraction) { return fixed(100.0 * fraction, 1) + "%"; }

}  // namespace

const std::vector<std::string>& report_figures() {
  static const std::vector<std::string> figures = {"heatmap.svg", "pca_vte.svg", "pca_pool.svg", "perturb.svg"};
  return figures;
}

Report build_report(const fs::path& dir, const std::string& experiment_hash) {
  const auto dataset = read_csv(dir / "dataset_summary.csv");
  const auto skills_log = read_csv(dir / "skills_log.csv");
  const auto vte_log = read_csv(dir / "vte_log.csv");
  const auto iq_log = read_csv(dir / "iq_eval_log.csv");
  const json metrics = json::parse(read_text(dir / "metrics.json"));
  const json perturb = json::parse(read_text(dir / "perturb.json"));
  if (skills_log.empty() || vte_log.empty() || iq_log.empty()) throw Error("report: a training log is empty");

  json r;
  r["experiment"] = experiment_hash;
  r["tool_version"] = kToolVersion;

  json levels = json::array();
  for (const auto& row : dataset) {
    levels.push_back({{"level", std::stoi(row.at("level"))},
                      {"count", std::stoi(row.at("count"))},
                      {"mean_return", num(row, "mean_return")},
                      {"std_return", num(row, "std_return")}});
  }
  r["dataset"] = levels;
  r["imitation"] = metrics.at("imitation");
  r["classification"] = metrics.at("classification");
  r["regression"] = metrics.at("regression");
  r["clustering"] = metrics.at("clustering");
  r["dim_std"] = metrics.at("dim_std");
  r["heatmap"] = metrics.at("heatmap");
  r["pca"] = metrics.at("pca");
  r["perturbation"] = perturb;

  const auto& skills_last = skills_log.back();
  const auto& vte_last = vte_log.back();
  // Per evaluation step: mean return for each level.
  std::map<long, std::map<int, std::pair<double, double>>> curve;
  for (const auto& row : iq_log) {
    auto& cell = curve[std::stol(row.at("step"))][std::stoi(row.at("level"))];
    cell.first += num(row, "mean_return");
    cell.second += 1.0;
  }
  json iq_curve = json::array();
  for (const auto& [step, by_level] : curve) {
    json means = json::array();
    for (const auto& [level, acc] : by_level) means.push_back(acc.first / acc.second);
    iq_curve.push_back({{"step", step}, {"level_returns", means}});
  }
  r["training"] = {{"skills",
                    {{"epochs", skills_log.size()},
                     {"elbo", num(skills_last, "elbo")},
                     {"info_cost", num(skills_last, "infocost")},
                     {"cluster_error", num(skills_last, "cluster_err")}}},
                   {"vte",
                    {{"epochs", vte_log.size()},
                     {"loss", num(vte_last, "loss")},
                     {"reconstruction", num(vte_last, "reconstruction")},
                     {"kld", num(vte_last, "kld")}}},
                   {"condiq", {{"curve", iq_curve}}}};
  json figures = json::object();
  for (const auto& f : report_figures()) figures[f] = sha256_file(dir / f);
  r["figures"] = figures;

  std::ostringstream md;
  md << "# Trajectory embedding run report\n\n";
  md << "Experiment `" << experiment_hash.substr(0, 16) << "`, " << kToolVersion << ".\n\n";

  md << "## Dataset returns by ability level\n\n| Level | Trajectories | Mean return | Std |\n|---|---|---|---|\n";
  for (const auto& l : levels) {
    md << "| " << l["level"].get<int>() << " | " << l["count"].get<int>() << " | "
       << fixed(l["mean_return"].get<double>(), 3) << " | " << fixed(l["std_return"].get<double>(), 3) << " |\n";
  }

  const auto& im = metrics.at("imitation");
  md << "\n## Conditional imitation: relative return error\n\n"
     << "| Level | Target return | Learned return | Relative error | BC return | BC relative error |\n"
     << "|---|---|---|---|---|---|\n";
  for (const auto& l : im.at("levels")) {
    md << "| " << l["level"].get<int>() << " | " << fixed(l["target_return"].get<double>(), 3) << " | "
       << fixed(l["learned_return"].get<double>(), 3) << " | " << fixed(l["relative_error"].get<double>(), 1)
       << "% | " << fixed(l["bc_return"].get<double>(), 3) << " | " << fixed(l["bc_relative_error"].get<double>(), 1)
       << "% |\n";
  }
  md << "| mean | | | " << fixed(im["mean_relative_error"].get<double>(), 1) << "% | | "
     << fixed(im["bc_mean_relative_error"].get<double>(), 1) << "% |\n";

  md << "\n## Ability classification\n\n"
     << "Held-out accuracy " << pct(metrics["classification"]["test_accuracy"].get<double>()) << " on "
     << metrics["classification"]["test_rows"].get<std::size_t>() << " trajectories (train "
     << pct(metrics["classification"]["train_accuracy"].get<double>()) << ").\n";
  md << "\n## Return regression\n\nHeld-out relative error "
     << fixed(metrics["regression"]["test_relative_error"].get<double>(), 2) << "%.\n";

  const auto& ds = metrics.at("dim_std");
  md << "\n## Clustering and the mean-pool ablation\n\n| Embedding | k-means accuracy | Min per-dim std |\n|---|---|---|\n"
     << "| VTE | " << pct(metrics["clustering"]["vte_accuracy"].get<double>()) << " | "
     << fixed(ds["vte_min"].get<double>(), 4) << " |\n"
     << "| Mean pool | " << pct(metrics["clustering"]["mean_pool_accuracy"].get<double>()) << " | "
     << fixed(ds["mean_pool_min"].get<double>(), 4) << " |\n";
  md << "\n![PCA of trajectory embeddings](pca_vte.svg)\n![PCA of mean-pooled skills](pca_pool.svg)\n";

  md << "\n## Wasserstein distances between embedding groups\n\n"
     << "Largest within-level distance " << fixed(metrics["heatmap"]["max_intra_level"].get<double>(), 4)
     << ", smallest between-level distance " << fixed(metrics["heatmap"]["min_inter_level"].get<double>(), 4)
     << ".\n\n![Heatmap](heatmap.svg)\n";

  md << "\n## Embedding perturbation\n\n"
     << perturb["monotone_dims"].get<std::size_t>() << " of " << perturb["dims"].size()
     << " dimensions change the return monotonically. Dimension " << perturb["featured_dim"].get<std::size_t>()
     << " is shown.\n\n| Delta | Mean return | Mean speed | Mean action magnitude |\n|---|---|---|---|\n";
  for (const auto& row : perturb["dims"][perturb["featured_dim"].get<std::size_t>()]["deltas"]) {
    md << "| " << fixed(row["delta"].get<double>(), 2) << " | " << fixed(row["mean_return"].get<double>(), 3) << " | "
       << fixed(row["mean_speed"].get<double>(), 3) << " | " << fixed(row["mean_action_magnitude"].get<double>(), 3)
       << " |\n";
  }
  md << "\n![Perturbed rollouts](perturb.svg)\n";

  md << "\n## Training\n\n"
     << "Skill model: " << skills_log.size() << " epochs, final bound " << fixed(num(skills_last, "elbo"), 3)
     << ", clustering error " << fixed(num(skills_last, "cluster_err"), 3) << ".\n"
     << "Trajectory encoder: " << vte_log.size() << " epochs, final loss " << fixed(num(vte_last, "loss"), 3)
     << ", KL " << fixed(num(vte_last, "kld"), 3) << ".\n";

  return {r.dump(2) + "\n", md.str()};
}

}  // namespace traj::cli
