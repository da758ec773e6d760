#include "traj/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>

#include "traj/cli/manifest.hpp"
#include "traj/cli/report.hpp"
#include "traj/env/dataset.hpp"
#include "traj/error.hpp"
#include "traj/eval/analysis.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/eval/downstream.hpp"
#include "traj/eval/plots.hpp"
#include "traj/hssm/skills.hpp"
#include "traj/iq/train.hpp"
#include "traj/log.hpp"
#include "traj/num/checkpoint.hpp"

namespace traj::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using num::Tensor;

namespace {

// Stream ids for derive_seed; one per training or evaluation stage.
enum SeedStream : std::uint64_t { kSkills = 1, kVte = 2, kEmbed = 3, kIq = 4, kEval = 5, kPerturb = 6 };

struct Artifact {
  std::string file;
  std::string producer;  // command that writes it
};

struct StageSpec {
  std::string name;
  std::vector<Artifact> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> sections;  // config sections the stage reads
};

const std::vector<StageSpec>& stage_specs() {
  static const std::vector<StageSpec> specs = {
      {"gen-data", {}, {"dataset.trajset", "dataset_summary.csv"}, {"env"}},
      {"train-skills",
       {{"dataset.trajset", "gen-data"}},
       {"skills.ckpt", "annotations.ckpt", "skills_log.csv"},
       {"hssm"}},
      {"train-vte",
       {{"dataset.trajset", "gen-data"}, {"skills.ckpt", "train-skills"}, {"annotations.ckpt", "train-skills"}},
       {"vte.ckpt", "vte_log.csv"},
       {"vte"}},
      {"embed",
       {{"dataset.trajset", "gen-data"}, {"annotations.ckpt", "train-skills"}, {"vte.ckpt", "train-vte"}},
       {"embeddings.ckpt", "embeddings.csv"},
       {"vte"}},
      {"train-iq",
       {{"dataset.trajset", "gen-data"}, {"embeddings.ckpt", "embed"}},
       {"iq.ckpt", "bc.ckpt", "iq_eval_log.csv"},
       {"condiq", "bc"}},
      {"eval",
       {{"dataset.trajset", "gen-data"},
        {"embeddings.ckpt", "embed"},
        {"iq.ckpt", "train-iq"},
        {"bc.ckpt", "train-iq"}},
       {"metrics.json", "imitation.csv", "heatmap.csv", "heatmap.svg", "pca_vte.svg", "pca_pool.svg"},
       {"eval", "condiq", "bc"}},
      {"perturb",
       {{"dataset.trajset", "gen-data"}, {"embeddings.ckpt", "embed"}, {"iq.ckpt", "train-iq"}},
       {"perturb.json", "perturb.csv", "perturb.svg"},
       {"eval", "condiq"}},
      {"report",
       {{"dataset_summary.csv", "gen-data"},
        {"skills_log.csv", "train-skills"},
        {"vte_log.csv", "train-vte"},
        {"iq_eval_log.csv", "train-iq"},
        {"metrics.json", "eval"},
        {"perturb.json", "perturb"},
        {"heatmap.svg", "eval"},
        {"pca_vte.svg", "eval"},
        {"pca_pool.svg", "eval"},
        {"perturb.svg", "perturb"}},
       {"report.json", "report.md"},
       {"env", "hssm", "vte", "condiq", "bc", "eval"}},
  };
  return specs;
}

const StageSpec& find_stage(const std::string& name) {
  for (const auto& s : stage_specs()) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Everything a stage needs from disk, loaded on demand.
class Workspace {
 public:
  Workspace(const PipelineConfig& config) : c_(config), dir_(config.out) {}

  const fs::path& dir() const { return dir_; }

  const env::AbilityDataset& data() {
    if (!data_) data_ = env::read_dataset(dir_ / "dataset.trajset");
    return *data_;
  }
  const env::EnvSpec& spec() { return data().spec; }
  std::unique_ptr<env::Env> world() { return env::make_env(spec()); }

  std::vector<hssm::SkillAnnotation> annotations() {
    const auto map = num::read_checkpoint(dir_ / "annotations.ckpt");
    std::vector<hssm::SkillAnnotation> out;
    for (const auto& t : data().trajectories) {
      const std::string key = "annotation/" + std::to_string(t.id());
      const auto z = map.find(key + "/z"), m = map.find(key + "/m");
      if (z == map.end() || m == map.end()) {
        throw MissingArtifactError("annotations.ckpt has no entry for trajectory " + std::to_string(t.id()) +
                                   "; run train-skills first");
      }
      out.push_back({z->second, m->second});
    }
    return out;
  }

  vte::VteEncoder encoder(std::size_t skills) {
    num::Rng rng(0);
    vte::VteEncoder enc(c_.vte.model, skills, rng);
    enc.load(num::read_checkpoint(dir_ / "vte.ckpt"));
    return enc;
  }

  struct Embeddings {
    std::vector<std::uint64_t> ids;
    Tensor mu, sigma, pooled;
  };
  const Embeddings& embeddings() {
    if (!emb_) {
      const auto map = num::read_checkpoint(dir_ / "embeddings.ckpt");
      Embeddings e;
      const Tensor& ids = map.at("embedding/ids");
      for (std::size_t i = 0; i < ids.rows(); ++i) e.ids.push_back(static_cast<std::uint64_t>(ids(i, 0)));
      e.mu = map.at("embedding/mu");
      e.sigma = map.at("embedding/sigma");
      e.pooled = map.at("embedding/mean_pool");
      if (e.ids.size() != data().trajectories.size()) {
        throw MissingArtifactError("embeddings.ckpt does not match the dataset; run embed first");
      }
      emb_ = std::move(e);
    }
    return *emb_;
  }

  iq::EmbeddingTable conditioning_table() {
    iq::EmbeddingTable table;
    const auto& e = embeddings();
    for (std::size_t i = 0; i < e.ids.size(); ++i) {
      const auto row = e.mu.row_span(i);
      table[e.ids[i]] = std::vector<double>(row.begin(), row.end());
    }
    return table;
  }

  iq::ConditionalAgent agent() {
    num::Rng rng(0);
    iq::ConditionalAgent a(spec(), c_.vte.model.embedding_dim, c_.condiq.agent, rng);
    a.load(num::read_checkpoint(dir_ / "iq.ckpt"));
    return a;
  }

  vte::SquashedGaussianPolicy bc_policy() {
    num::Rng rng(0);
    vte::SquashedGaussianPolicy p("bc", spec().state_dim, 0, spec().action_low, spec().action_high,
                                  c_.condiq.bc.hidden, rng);
    p.load(num::read_checkpoint(dir_ / "bc.ckpt"), "bc/");
    return p;
  }

 private:
  const PipelineConfig& c_;
  fs::path dir_;
  std::optional<env::AbilityDataset> data_;
  std::optional<Embeddings> emb_;
};

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor t = Tensor::zeros(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), t.row_span(r).begin());
  return t;
}

std::vector<int> abilities(const env::AbilityDataset& data) {
  std::vector<int> out;
  for (const auto& t : data.trajectories) out.push_back(t.eval_labels().ability);
  return out;
}

// ---- stages ----

void gen_data(const PipelineConfig& c, Workspace& ws) {
  const auto spec = env::default_spec(c.env.name, c.env.horizon);
  const auto data = env::generate_dataset(spec, c.env.levels, c.env.per_level, c.env.seed);
  env::write_dataset(ws.dir() / "dataset.trajset", data);
  std::ostringstream csv;
  csv << "level,count,mean_return,std_return\n";
  for (const auto& s : data.level_stats()) {
    csv << s.level << ',' << s.count << ',' << csv_number(s.mean) << ',' << csv_number(s.std) << '\n';
  }
  write_text(ws.dir() / "dataset_summary.csv", csv.str());
}

void train_skills(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  num::Rng rng(num::derive_seed(c.seed, kSkills, 0));
  hssm::HssmModel model(c.hssm.model, data.spec.state_dim, data.spec.action_dim, rng);
  const auto result = hssm::train_hssm(model, data, c.hssm.train, num::derive_seed(c.seed, kSkills, 1));
  num::TensorMap weights;
  model.store(weights);
  num::write_checkpoint(ws.dir() / "skills.ckpt", weights);

  num::TensorMap ann;
  const auto annotations = hssm::se_logit_all(model, data);
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string key = "annotation/" + std::to_string(data.trajectories[i].id());
    ann[key + "/z"] = annotations[i].z_logits;
    ann[key + "/m"] = annotations[i].m_logits;
  }
  num::write_checkpoint(ws.dir() / "annotations.ckpt", ann);
  write_text(ws.dir() / "skills_log.csv", hssm::training_log_csv(result.log));
}

void train_vte_stage(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto annotations = ws.annotations();
  num::Rng rng(num::derive_seed(c.seed, kVte, 0));
  vte::VteEncoder encoder(c.vte.model, annotations.front().z_logits.cols(), rng);
  vte::SquashedGaussianPolicy policy("vte.policy", data.spec.state_dim, c.vte.model.embedding_dim,
                                     data.spec.action_low, data.spec.action_high, c.vte.model.policy_hidden, rng);
  const auto result = vte::train_vte(encoder, policy, data, annotations, c.vte.train, num::derive_seed(c.seed, kVte, 1));
  num::TensorMap weights;
  encoder.store(weights);
  policy.store(weights, "vte/policy/");
  num::write_checkpoint(ws.dir() / "vte.ckpt", weights);
  std::ostringstream csv;
  csv << "epoch,loss,reconstruction,kld,drift\n";
  for (const auto& e : result.log) {
    csv << e.epoch << ',' << csv_number(e.loss) << ',' << csv_number(e.reconstruction) << ',' << csv_number(e.kld)
        << ',' << csv_number(e.drift) << '\n';
  }
  write_text(ws.dir() / "vte_log.csv", csv.str());
}

void embed(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto annotations = ws.annotations();
  auto encoder = ws.encoder(annotations.front().z_logits.cols());
  const auto ids = vte::trajectory_ids(data);
  const auto embeddings = vte::encode_all(encoder, annotations, ids, num::derive_seed(c.seed, kEmbed));
  std::vector<std::vector<double>> mu, sigma, pooled;
  Tensor id_column = Tensor::zeros(ids.size(), 1);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    mu.push_back(embeddings[i].mu);
    sigma.push_back(embeddings[i].sigma);
    pooled.push_back(vte::mean_pool_embed(annotations[i]));
    id_column(i, 0) = static_cast<double>(ids[i]);
  }
  num::write_checkpoint(ws.dir() / "embeddings.ckpt", {{"embedding/ids", id_column},
                                                       {"embedding/mu", rows_to_tensor(mu)},
                                                       {"embedding/sigma", rows_to_tensor(sigma)},
                                                       {"embedding/mean_pool", rows_to_tensor(pooled)}});
  write_text(ws.dir() / "embeddings.csv", vte::embedding_csv(embeddings, data));
}

void train_iq(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto table = ws.conditioning_table();
  const auto world = ws.world();
  num::Rng rng(num::derive_seed(c.seed, kIq, 0));
  iq::ConditionalAgent agent(data.spec, c.vte.model.embedding_dim, c.condiq.agent, rng);
  const auto result = iq::train_cond_iq(agent, data, table, *world, c.condiq.train, num::derive_seed(c.seed, kIq, 1));
  num::TensorMap weights;
  agent.store(weights);
  num::write_checkpoint(ws.dir() / "iq.ckpt", weights);
  write_text(ws.dir() / "iq_eval_log.csv", iq::eval_log_csv(result.log));

  auto bc = iq::train_bc_baseline(data, c.condiq.bc, num::derive_seed(c.seed, kIq, 2));
  num::TensorMap bc_weights;
  bc.store(bc_weights, "bc/");
  num::write_checkpoint(ws.dir() / "bc.ckpt", bc_weights);
}

json imitation_metrics(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto table = ws.conditioning_table();
  const auto world = ws.world();
  auto agent = ws.agent();
  auto bc = ws.bc_policy();
  const auto stats = data.level_stats();

  iq::EvalPlan plan;
  plan.sources_per_level = c.condiq.final_sources_per_level;
  plan.rollouts = c.condiq.final_rollouts;
  const auto rows =
      iq::evaluate_levels(agent, *world, data, table, plan, c.condiq.train.env_steps, num::derive_seed(c.seed, kEval, 1));
  write_text(ws.dir() / "imitation.csv", iq::eval_log_csv(rows));

  const auto bc_returns = iq::eval_policy(bc, *world, {}, plan.rollouts * plan.sources_per_level,
                                          num::derive_seed(c.seed, kEval, 2));
  json levels = json::array();
  double iq_total = 0.0, bc_total = 0.0;
  for (const auto& s : stats) {
    double error = 0.0, learned = 0.0, count = 0.0;
    for (const auto& r : rows) {
      if (r.level != s.level) continue;
      error += r.relative_l2;
      learned += r.mean_return;
      count += 1.0;
    }
    const double bc_error = iq::relative_l2_error(std::vector<double>{bc_returns.mean}, std::vector<double>{s.mean});
    levels.push_back({{"level", s.level},
                      {"target_return", s.mean},
                      {"learned_return", learned / count},
                      {"relative_error", error / count},
                      {"bc_return", bc_returns.mean},
                      {"bc_relative_error", bc_error}});
    iq_total += error / count;
    bc_total += bc_error;
  }
  const double n = static_cast<double>(stats.size());
  return {{"levels", levels},
          {"mean_relative_error", iq_total / n},
          {"bc_mean_relative_error", bc_total / n},
          {"bc_return_std", bc_returns.std}};
}

json pca_summary(const eval::PcaResult& p) {
  return {{"explained_variance", p.explained_variance}, {"rank_deficient", p.rank_deficient}};
}

void evaluate(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto& emb = ws.embeddings();
  const auto truth = abilities(data);
  const std::uint64_t seed = num::derive_seed(c.seed, kEval, 0);

  std::vector<std::vector<double>> mu_rows;
  for (std::size_t i = 0; i < emb.ids.size(); ++i) {
    const auto r = emb.mu.row_span(i);
    mu_rows.emplace_back(r.begin(), r.end());
  }
  const eval::EmbeddingTable table(data, mu_rows);
  const auto split = eval::stratified_split(table, c.eval.test_fraction, seed);
  const auto cls = eval::train_classifier(table, split, c.eval.classifier, num::derive_seed(seed, 1));
  const auto reg = eval::train_regressor(table, split, c.eval.regressor, num::derive_seed(seed, 2));

  const auto k = static_cast<std::size_t>(data.levels);
  const double vte_acc = eval::kmeans_hungarian_accuracy(emb.mu, truth, k, num::derive_seed(seed, 3));
  const double pool_acc = eval::kmeans_hungarian_accuracy(emb.pooled, truth, k, num::derive_seed(seed, 3));
  const auto vte_std = eval::embedding_dim_std(emb.mu);
  const auto pool_std = eval::embedding_dim_std(emb.pooled);

  std::map<int, Tensor> by_level;
  for (int level = 1; level <= data.levels; ++level) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == level) rows.push_back(mu_rows[i]);
    }
    by_level[level] = rows_to_tensor(rows);
  }
  const auto heat = eval::distance_heatmap(by_level, c.eval.heatmap_replicates, c.eval.heatmap_group);
  write_text(ws.dir() / "heatmap.csv", eval::heatmap_csv(heat));
  write_text(ws.dir() / "heatmap.svg", eval::heatmap_svg(heat, "W1 distance between embedding groups"));

  const auto pca_vte = eval::pca(emb.mu, 2);
  const auto pca_pool = eval::pca(emb.pooled, 2);
  write_text(ws.dir() / "pca_vte.svg", eval::scatter_svg(pca_vte.projected, truth, "PCA of trajectory embeddings"));
  write_text(ws.dir() / "pca_pool.svg", eval::scatter_svg(pca_pool.projected, truth, "PCA of mean-pooled skills"));

  json metrics;
  metrics["classification"] = {{"train_accuracy", cls.train_accuracy},
                               {"test_accuracy", cls.test_accuracy},
                               {"test_rows", split.test.size()}};
  metrics["regression"] = {{"test_relative_error", reg.test_relative_error}};
  metrics["clustering"] = {{"vte_accuracy", vte_acc}, {"mean_pool_accuracy", pool_acc}};
  metrics["dim_std"] = {{"vte", vte_std},
                        {"mean_pool", pool_std},
                        {"vte_min", *std::min_element(vte_std.begin(), vte_std.end())},
                        {"mean_pool_min", *std::min_element(pool_std.begin(), pool_std.end())}};
  metrics["heatmap"] = {{"max_intra_level", heat.max_intra_level()},
                        {"min_inter_level", heat.min_inter_level()},
                        {"groups", heat.labels.size()}};
  metrics["pca"] = {{"vte", pca_summary(pca_vte)}, {"mean_pool", pca_summary(pca_pool)}};
  metrics["imitation"] = imitation_metrics(c, ws);
  write_json(ws.dir() / "metrics.json", metrics);
}

void perturb(const PipelineConfig& c, Workspace& ws) {
  const auto& data = ws.data();
  const auto& emb = ws.embeddings();
  const auto world = ws.world();
  auto agent = ws.agent();

  // Base: the first trajectory of the configured level.
  std::size_t base_index = 0;
  while (base_index < data.trajectories.size() &&
         data.trajectories[base_index].eval_labels().ability != c.eval.perturb_level) {
    ++base_index;
  }
  if (base_index == data.trajectories.size()) throw Error("perturb: no trajectory at the configured level");
  const auto mu_row = emb.mu.row_span(base_index);
  const std::vector<double> base(mu_row.begin(), mu_row.end());

  json dims = json::array();
  std::vector<std::vector<eval::PerturbRecord>> sweeps;
  std::size_t featured = 0;
  double featured_range = -1.0;
  bool featured_monotone = false;
  for (std::size_t d = 0; d < base.size(); ++d) {
    const double unit = emb.sigma(base_index, d);
    auto records = eval::perturb_sweep(agent, *world, base, d, c.eval.perturb_deltas, unit, c.eval.perturb_rollouts,
                                       num::derive_seed(c.seed, kPerturb));
    double lo = records.front().mean_return, hi = lo;
    json rows = json::array();
    for (const auto& r : records) {
      lo = std::min(lo, r.mean_return);
      hi = std::max(hi, r.mean_return);
      rows.push_back({{"delta", r.delta},
                      {"mean_return", r.mean_return},
                      {"mean_speed", r.mean_speed},
                      {"mean_action_magnitude", r.mean_action_magnitude}});
    }
    const bool monotone = eval::monotone_returns(records);
    dims.push_back({{"dim", d}, {"unit", unit}, {"monotone", monotone}, {"return_range", hi - lo}, {"deltas", rows}});
    // Prefer monotone dimensions, then the widest return range.
    if ((monotone && !featured_monotone) || (monotone == featured_monotone && hi - lo > featured_range)) {
      featured = d;
      featured_range = hi - lo;
      featured_monotone = monotone;
    }
    sweeps.push_back(std::move(records));
  }
  std::size_t monotone_count = 0;
  for (const auto& d : dims) monotone_count += d["monotone"].get<bool>() ? 1 : 0;
  write_json(ws.dir() / "perturb.json", {{"base_trajectory", emb.ids[base_index]},
                                         {"featured_dim", featured},
                                         {"monotone_dims", monotone_count},
                                         {"dims", dims}});
  write_text(ws.dir() / "perturb.csv", eval::perturb_traces_csv(sweeps[featured]));
  write_text(ws.dir() / "perturb.svg",
             eval::perturb_traces_svg(sweeps[featured], "Rollouts with embedding dimension " +
                                                            std::to_string(featured) + " perturbed"));
}

void report(const PipelineConfig& c, Workspace& ws) {
  const auto out = build_report(ws.dir(), experiment_hash(c));
  write_text(ws.dir() / "report.json", out.json_text);
  write_text(ws.dir() / "report.md", out.markdown);
}

using StageFn = std::function<void(const PipelineConfig&, Workspace&)>;

StageFn stage_function(const std::string& name) {
  if (name == "gen-data") return gen_data;
  if (name == "train-skills") return train_skills;
  if (name == "train-vte") return train_vte_stage;
  if (name == "embed") return embed;
  if (name == "train-iq") return train_iq;
  if (name == "eval") return evaluate;
  if (name == "perturb") return perturb;
  if (name == "report") return report;
  throw ConfigError("unknown stage '" + name + "'");
}

std::string stage_config_hash(const PipelineConfig& c, const StageSpec& spec) {
  std::string text = "seed = " + std::to_string(c.seed) + "\n";
  for (const auto& s : spec.sections) text += section_ini(c, s);
  return sha256_hex(text);
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : stage_specs()) out.push_back(s.name);
    return out;
  }();
  return names;
}

std::string experiment_hash(const PipelineConfig& config) {
  std::string text = "seed = " + std::to_string(config.seed) + "\n";
  for (const char* s : {"env", "hssm", "vte", "condiq", "bc", "eval"}) text += section_ini(config, s);
  return sha256_hex(text);
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

StageOutcome Pipeline::run(const std::string& stage) {
  find_stage(stage);
  RunLock lock(config_.out);
  return run_locked(stage);
}

std::vector<StageOutcome> Pipeline::run_all() {
  RunLock lock(config_.out);
  std::vector<StageOutcome> out;
  for (const auto& name : stage_names()) out.push_back(run_locked(name));
  return out;
}

StageOutcome Pipeline::run_locked(const std::string& stage) {
  const auto& spec = find_stage(stage);
  const fs::path dir = config_.out;
  auto manifest = Manifest::load(dir);

  StageRecord record;
  record.seed = config_.seed;
  record.config_hash = stage_config_hash(config_, spec);
  for (const auto& input : spec.inputs) {
    const fs::path path = dir / input.file;
    if (!fs::exists(path)) {
      throw MissingArtifactError(stage + " needs " + input.file + " in " + dir.string() + "; run " + input.producer +
                                 " first");
    }
    record.inputs[input.file] = sha256_file(path);
  }

  if (const auto previous = manifest.stage(stage)) {
    bool current = previous->config_hash == record.config_hash && previous->seed == record.seed &&
                   previous->inputs == record.inputs;
    for (const auto& file : spec.outputs) {
      const auto it = previous->outputs.find(file);
      current = current && it != previous->outputs.end() && fs::exists(dir / file) &&
                sha256_file(dir / file) == it->second;
    }
    if (current) {
      log::info(stage + ": up to date");
      return {stage, true, 0.0};
    }
  }

  log::info(stage + ": running");
  const auto start = std::chrono::steady_clock::now();
  Workspace ws(config_);
  stage_function(stage)(config_, ws);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& file : spec.outputs) record.outputs[file] = sha256_file(dir / file);

  manifest.config_hash = experiment_hash(config_);
  manifest.record(stage, record);
  manifest.save(dir);
  log::info(stage + ": done in " + std::to_string(record.wall_seconds) + " s");
  return {stage, false, record.wall_seconds};
}

}  // namespace traj::cli
