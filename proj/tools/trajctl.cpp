#include <CLI11.hpp>
#include <iostream>

#include "traj/cli/config.hpp"
#include "traj/cli/pipeline.hpp"
#include "traj/error.hpp"
#include "traj/log.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitDivergence = 4;

}  // namespace

int main(int argc, char** argv) {
  using namespace traj;

  CLI::App app{"Trajectory embedding pipeline: data, skills, embeddings, imitation and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  bool verbose = false, quiet = false;
  app.add_option("--config", config_path, "INI config file (defaults apply to missing keys)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Overrides [run] seed");
  auto* out_opt = app.add_option("--out", out, "Overrides [run] out, the run directory");
  app.add_flag("-v,--verbose", verbose, "Log training progress");
  app.add_flag("-q,--quiet", quiet, "Only print errors");

  std::vector<std::pair<std::string, CLI::App*>> commands;
  const std::map<std::string, std::string> help = {
      {"gen-data", "Generate the ability-labelled trajectory dataset"},
      {"train-skills", "Train the skill model and write skill annotations"},
      {"train-vte", "Train the trajectory encoder on skill annotations"},
      {"embed", "Encode every trajectory"},
      {"train-iq", "Train the embedding-conditioned imitation agent and the BC baseline"},
      {"eval", "Classification, regression, clustering, distances and imitation returns"},
      {"perturb", "Sweep single embedding dimensions through the imitation agent"},
      {"report", "Aggregate all results into report.json and report.md"},
  };
  for (const auto& name : cli::stage_names()) commands.emplace_back(name, app.add_subcommand(name, help.at(name)));
  auto* all = app.add_subcommand("pipeline", "Run every stage in order, skipping up-to-date ones");
  auto* show = app.add_subcommand("show-config", "Print the fully resolved config");

  CLI11_PARSE(app, argc, argv);
  log::set_level(quiet ? log::Level::Quiet : (verbose ? log::Level::Info : log::Level::Warn));

  try {
    auto config = config_path.empty() ? cli::default_config() : cli::load_config(config_path);
    if (*seed_opt) config.seed = seed;
    if (*out_opt) config.out = out;
    if (show->parsed()) {
      std::cout << cli::canonical_ini(config);
      return 0;
    }
    cli::Pipeline pipeline(config);
    std::vector<cli::StageOutcome> outcomes;
    if (all->parsed()) {
      outcomes = pipeline.run_all();
    } else {
      for (const auto& [name, sub] : commands) {
        if (sub->parsed()) outcomes.push_back(pipeline.run(name));
      }
    }
    if (!quiet) {
      for (const auto& o : outcomes) {
        std::cout << o.stage << ": " << (o.skipped ? "up to date" : "done in " + std::to_string(o.seconds) + " s")
                  << '\n';
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const NumericError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
