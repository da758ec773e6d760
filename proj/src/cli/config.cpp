#include "traj/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "traj/error.hpp"

namespace traj::cli {

namespace {

namespace pt = boost::property_tree;

// Accepted numeric range; integers use the same bounds.
struct Bounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;

  bool contains(double v) const { return (lo_open ? v > lo : v >= lo) && v <= hi; }
  std::string describe() const {
    std::ostringstream o;
    if (std::isinf(hi)) {
      o << (lo_open ? "> " : ">= ") << lo;
    } else {
      o << "in " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
    }
    return o.str();
  }
};

Bounds positive() { return {0.0, std::numeric_limits<double>::infinity(), true}; }
Bounds at_least(double lo) { return {lo}; }
Bounds within(double lo, double hi) { return {lo, hi}; }
Bounds any() { return {}; }

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return {buf, end};
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

bool parse_unsigned(const std::string& text, std::uint64_t& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::string initial_name(iq::InitialEstimate e) {
  switch (e) {
    case iq::InitialEstimate::Starts: return "starts";
    case iq::InitialEstimate::PolicyTelescoped: return "policy";
    case iq::InitialEstimate::MixedTelescoped: return "mixed";
  }
  return "starts";
}

// Reads fields from a parsed tree, collecting one message per bad field.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  void section(const std::string& name) {
    section_ = name;
    known_[name];
  }

  void field(const std::string& key, std::uint64_t& v, Bounds b) {
    read(key, [&](const std::string& s) {
      std::uint64_t x = 0;
      if (!parse_unsigned(s, x)) return fail(key, "expected a non-negative integer, got '" + s + "'");
      if (!b.contains(static_cast<double>(x))) return fail(key, "must be " + b.describe() + ", got " + s);
      v = x;
    });
  }
  void field(const std::string& key, int& v, Bounds b) {
    std::uint64_t x = static_cast<std::uint64_t>(v);
    field(key, x, b);
    v = static_cast<int>(x);
  }
  void field(const std::string& key, double& v, Bounds b) {
    read(key, [&](const std::string& s) {
      double x = 0.0;
      if (!parse_number(s, x)) return fail(key, "expected a number, got '" + s + "'");
      if (!b.contains(x)) return fail(key, "must be " + b.describe() + ", got " + s);
      v = x;
    });
  }
  void field(const std::string& key, bool& v) {
    read(key, [&](const std::string& s) {
      const std::string t = trim(s);
      if (t == "true" || t == "1" || t == "yes") {
        v = true;
      } else if (t == "false" || t == "0" || t == "no") {
        v = false;
      } else {
        fail(key, "expected true or false, got '" + s + "'");
      }
    });
  }
  void field(const std::string& key, std::string& v, const std::set<std::string>& allowed) {
    read(key, [&](const std::string& s) {
      const std::string t = trim(s);
      if (!allowed.empty() && !allowed.count(t)) {
        std::string options;
        for (const auto& a : allowed) options += (options.empty() ? "" : ", ") + a;
        return fail(key, "expected one of {" + options + "}, got '" + s + "'");
      }
      v = t;
    });
  }
  void field(const std::string& key, std::filesystem::path& v) {
    read(key, [&](const std::string& s) {
      if (trim(s).empty()) return fail(key, "must not be empty");
      v = trim(s);
    });
  }
  void field(const std::string& key, std::vector<std::size_t>& v, Bounds b, bool allow_empty) {
    read(key, [&](const std::string& s) {
      std::vector<std::size_t> out;
      if (!split(s, [&](const std::string& item) {
            std::uint64_t x = 0;
            if (!parse_unsigned(item, x) || !b.contains(static_cast<double>(x))) return false;
            out.push_back(static_cast<std::size_t>(x));
            return true;
          })) {
        return fail(key, "expected a comma-separated list of integers " + b.describe() + ", got '" + s + "'");
      }
      if (out.empty() && !allow_empty) return fail(key, "must not be empty");
      v = out;
    });
  }
  void field(const std::string& key, std::vector<double>& v) {
    read(key, [&](const std::string& s) {
      std::vector<double> out;
      if (!split(s, [&](const std::string& item) {
            double x = 0.0;
            if (!parse_number(item, x)) return false;
            out.push_back(x);
            return true;
          })) {
        return fail(key, "expected a comma-separated list of numbers, got '" + s + "'");
      }
      if (out.empty()) return fail(key, "must not be empty");
      v = out;
    });
  }
  void field(const std::string& key, iq::FSpec& v) {
    read(key, [&](const std::string& s) {
      try {
        v = iq::parse_f(trim(s));
      } catch (const Error& e) {
        fail(key, e.what());
      }
    });
  }
  void field(const std::string& key, iq::InitialEstimate& v) {
    read(key, [&](const std::string& s) {
      const std::string t = trim(s);
      for (auto e : {iq::InitialEstimate::Starts, iq::InitialEstimate::PolicyTelescoped,
                     iq::InitialEstimate::MixedTelescoped}) {
        if (t == initial_name(e)) {
          v = e;
          return;
        }
      }
      fail(key, "expected one of {starts, policy, mixed}, got '" + s + "'");
    });
  }

  void fail(const std::string& key, const std::string& message) {
    errors_.push_back("[" + section_ + "] " + key + ": " + message);
  }
  void fail_section(const std::string& section, const std::string& key, const std::string& message) {
    errors_.push_back("[" + section + "] " + key + ": " + message);
  }

  // Unknown sections and keys, in file order.
  void check_unknown() {
    for (const auto& [name, body] : tree_) {
      if (!body.data().empty() && body.empty()) {
        errors_.push_back(name + ": keys must be inside a section");
        continue;
      }
      auto it = known_.find(name);
      if (it == known_.end()) {
        errors_.push_back("[" + name + "]: unknown section");
        continue;
      }
      for (const auto& [key, value] : body) {
        if (!it->second.count(key)) errors_.push_back("[" + name + "] " + key + ": unknown key");
      }
    }
  }

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  template <class F>
  void read(const std::string& key, F&& apply) {
    known_[section_].insert(key);
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section_, '\0'));
    if (!sec) return;
    const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (value) apply(*value);
  }

  template <class F>
  static bool split(const std::string& s, F&& item) {
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
      if (trim(part).empty()) {
        if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
        return false;
      }
      if (!item(part)) return false;
    }
    return true;
  }

  const pt::ptree& tree_;
  std::string section_;
  std::map<std::string, std::set<std::string>> known_;
  std::vector<std::string> errors_;
};

// Emits canonical INI for the selected sections (all when empty).
class Writer {
 public:
  explicit Writer(std::string only = {}) : only_(std::move(only)) {}

  void section(const std::string& name) {
    current_ = name;
    if (active()) out_ << (out_.tellp() > 0 ? "\n" : "") << "[" << name << "]\n";
  }
  void field(const std::string& key, std::uint64_t v, Bounds) { put(key, std::to_string(v)); }
  void field(const std::string& key, int v, Bounds) { put(key, std::to_string(v)); }
  void field(const std::string& key, double v, Bounds) { put(key, format_double(v)); }
  void field(const std::string& key, bool v) { put(key, v ? "true" : "false"); }
  void field(const std::string& key, const std::string& v, const std::set<std::string>&) { put(key, v); }
  void field(const std::string& key, const std::filesystem::path& v) { put(key, v.generic_string()); }
  void field(const std::string& key, const std::vector<std::size_t>& v, Bounds, bool) { put(key, join(v)); }
  void field(const std::string& key, const std::vector<double>& v) { put(key, join(v)); }
  void field(const std::string& key, const iq::FSpec& v) { put(key, iq::to_string(v)); }
  void field(const std::string& key, iq::InitialEstimate v) { put(key, initial_name(v)); }

  std::string str() const { return out_.str(); }

 private:
  bool active() const { return only_.empty() || only_ == current_; }
  void put(const std::string& key, const std::string& value) {
    if (active()) out_ << key << " = " << value << "\n";
  }

  std::string only_;
  std::string current_;
  std::ostringstream out_;
};

// The schema: every configurable field, its section, key and range.
template <class C, class V>
void visit(C& c, V& v) {
  v.section("run");
  v.field("seed", c.seed, any());
  v.field("out", c.out);

  v.section("env");
  v.field("name", c.env.name, std::set<std::string>{"waypoint2d", "linewalker1d"});
  v.field("levels", c.env.levels, within(2, 16));
  v.field("per_level", c.env.per_level, at_least(2));
  v.field("horizon", c.env.horizon, within(2, 1 << 20));
  v.field("seed", c.env.seed, any());

  v.section("hssm");
  v.field("skills", c.hssm.model.skills, within(2, 256));
  v.field("abstraction", c.hssm.model.abstraction, at_least(1));
  v.field("width", c.hssm.model.width, at_least(1));
  v.field("heads", c.hssm.model.heads, at_least(1));
  v.field("decoder_hidden", c.hssm.model.decoder_hidden, at_least(1));
  v.field("epochs", c.hssm.train.epochs, at_least(1));
  v.field("warmup_epochs", c.hssm.train.warmup_epochs, at_least(0));
  v.field("batch", c.hssm.train.batch, at_least(1));
  v.field("lr", c.hssm.train.lr, positive());
  v.field("tau_start", c.hssm.train.tau_start, positive());
  v.field("tau_end", c.hssm.train.tau_end, positive());
  v.field("constraint_slack", c.hssm.train.constraint_slack, at_least(0));
  v.field("dual_step", c.hssm.train.dual_step, at_least(0));
  v.field("lambda_init", c.hssm.train.lambda_init, at_least(0));
  v.field("early_stop", c.hssm.train.early_stop);
  v.field("early_stop_error", c.hssm.train.early_stop_error, within(0, 1));

  v.section("vte");
  v.field("embedding_dim", c.vte.model.embedding_dim, at_least(1));
  v.field("blocks", c.vte.model.blocks, at_least(1));
  v.field("hidden", c.vte.model.hidden, at_least(1));
  v.field("heads", c.vte.model.heads, at_least(1));
  v.field("annotation_width", c.vte.model.annotation_width, at_least(1));
  v.field("policy_hidden", c.vte.model.policy_hidden, at_least(1), true);
  v.field("bc_alpha", c.vte.train.weights.bc_alpha, positive());
  v.field("kld_alpha", c.vte.train.weights.kld_alpha, at_least(0));
  v.field("epochs", c.vte.train.epochs, at_least(1));
  v.field("batch", c.vte.train.batch, at_least(1));
  v.field("lr", c.vte.train.lr, positive());
  v.field("early_stop_eps", c.vte.train.early_stop_eps, at_least(0));
  v.field("early_stop_window", c.vte.train.early_stop_window, at_least(1));

  v.section("condiq");
  v.field("actor_hidden", c.condiq.agent.actor_hidden, at_least(1), true);
  v.field("critic_hidden", c.condiq.agent.critic_hidden, at_least(1), true);
  v.field("actor_lr", c.condiq.train.actor_lr, at_least(0));
  v.field("critic_lr", c.condiq.train.critic_lr, at_least(0));
  v.field("init_temp", c.condiq.agent.temperature, at_least(0));
  v.field("gamma", c.condiq.agent.gamma, {0.0, 1.0, true});
  v.field("batch", c.condiq.train.batch, at_least(1));
  v.field("f", c.condiq.train.loss.f);
  v.field("initial", c.condiq.train.loss.initial);
  v.field("regularize_policy", c.condiq.train.loss.regularize_policy);
  v.field("actor_on_expert_states", c.condiq.train.actor_on_expert_states);
  v.field("value_samples", c.condiq.train.loss.value_samples, at_least(1));
  v.field("steps", c.condiq.train.env_steps, at_least(1));
  v.field("start_steps", c.condiq.train.start_steps, at_least(0));
  v.field("steps_per_update", c.condiq.train.env_steps_per_update, at_least(1));
  v.field("target_rho", c.condiq.train.target_rho, within(0, 1));
  v.field("buffer_capacity", c.condiq.train.buffer_capacity, at_least(1));
  v.field("eval_interval", c.condiq.train.eval_interval, at_least(1));
  v.field("eval_sources", c.condiq.train.eval.sources_per_level, at_least(1));
  v.field("eval_rollouts", c.condiq.train.eval.rollouts, at_least(1));
  v.field("final_sources", c.condiq.final_sources_per_level, at_least(1));
  v.field("final_rollouts", c.condiq.final_rollouts, at_least(1));

  v.section("bc");
  v.field("hidden", c.condiq.bc.hidden, at_least(1), true);
  v.field("epochs", c.condiq.bc.epochs, at_least(1));
  v.field("batch", c.condiq.bc.batch, at_least(1));
  v.field("lr", c.condiq.bc.lr, positive());

  v.section("eval");
  v.field("test_fraction", c.eval.test_fraction, {0.0, 1.0, true});
  v.field("classifier_hidden", c.eval.classifier.hidden, at_least(1));
  v.field("classifier_epochs", c.eval.classifier.epochs, at_least(1));
  v.field("classifier_batch", c.eval.classifier.batch, at_least(1));
  v.field("classifier_lr", c.eval.classifier.lr, positive());
  v.field("regressor_hidden", c.eval.regressor.hidden, at_least(1));
  v.field("regressor_epochs", c.eval.regressor.epochs, at_least(1));
  v.field("regressor_batch", c.eval.regressor.batch, at_least(1));
  v.field("regressor_lr", c.eval.regressor.lr, positive());
  v.field("heatmap_replicates", c.eval.heatmap_replicates, at_least(1));
  v.field("heatmap_group", c.eval.heatmap_group, at_least(1));
  v.field("perturb_deltas", c.eval.perturb_deltas);
  v.field("perturb_rollouts", c.eval.perturb_rollouts, at_least(1));
  v.field("perturb_level", c.eval.perturb_level, at_least(1));
}

void check_relations(const PipelineConfig& c, Reader& r) {
  if (c.hssm.model.width % c.hssm.model.heads != 0) r.fail_section("hssm", "heads", "must divide width");
  if (c.vte.model.hidden % c.vte.model.heads != 0) r.fail_section("vte", "heads", "must divide hidden");
  if (c.hssm.train.warmup_epochs >= c.hssm.train.epochs) {
    r.fail_section("hssm", "warmup_epochs", "must be smaller than epochs");
  }
  if (c.hssm.train.tau_end > c.hssm.train.tau_start) r.fail_section("hssm", "tau_end", "must not exceed tau_start");
  if (c.env.horizon > c.hssm.model.max_length || c.env.horizon > c.vte.model.max_length) {
    r.fail_section("env", "horizon", "must be at most " + std::to_string(c.hssm.model.max_length));
  }
  if (c.condiq.train.loss.regularize_policy && c.condiq.train.loss.f.kind != iq::FKind::Chi2) {
    r.fail_section("condiq", "regularize_policy", "requires f = chi2");
  }
  if (c.eval.perturb_level > c.env.levels) r.fail_section("eval", "perturb_level", "must be at most env.levels");
  bool has_zero = false;
  for (double d : c.eval.perturb_deltas) has_zero = has_zero || d == 0.0;
  if (!has_zero) r.fail_section("eval", "perturb_deltas", "must include 0 (the control group)");
  const std::size_t grouped = c.eval.heatmap_replicates * c.eval.heatmap_group;
  if (grouped > c.env.per_level) {
    r.fail_section("eval", "heatmap_group", "replicates x group (" + std::to_string(grouped) +
                                                ") exceeds env.per_level");
  }
  const double per_split = c.eval.test_fraction * static_cast<double>(c.env.per_level);
  if (std::lround(per_split) < 1 || std::lround(per_split) >= static_cast<long>(c.env.per_level)) {
    r.fail_section("eval", "test_fraction", "leaves a level without train or test rows");
  }
}

}  // namespace

PipelineConfig default_config() {
  PipelineConfig c;
  c.hssm.model.skills = 8;
  c.hssm.model.width = 32;
  c.hssm.model.heads = 4;
  c.hssm.model.abstraction = 16;
  c.hssm.model.decoder_hidden = 32;
  c.hssm.train.epochs = 40;
  c.hssm.train.warmup_epochs = 8;
  c.hssm.train.batch = 16;

  c.vte.model.embedding_dim = 10;
  c.vte.model.blocks = 2;
  c.vte.model.hidden = 64;
  c.vte.model.heads = 4;
  c.vte.train.epochs = 20;
  c.vte.train.batch = 16;
  c.vte.train.weights = {0.5, 1.0};

  c.condiq.agent.temperature = 1e-2;
  c.condiq.train.actor_lr = 1e-4;
  c.condiq.train.critic_lr = 1e-4;
  c.condiq.train.batch = 32;
  c.condiq.train.loss.f = {iq::FKind::Chi2, 0.5};
  c.condiq.train.loss.initial = iq::InitialEstimate::MixedTelescoped;
  c.condiq.train.loss.regularize_policy = true;
  c.condiq.train.actor_on_expert_states = true;
  c.condiq.train.env_steps = 30000;
  c.condiq.train.eval_interval = 5000;

  c.eval.classifier.epochs = 80;
  c.eval.regressor.epochs = 200;
  return c;
}

PipelineConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig c = default_config();
  Reader reader(tree);
  visit(c, reader);
  reader.check_unknown();
  if (reader.errors().empty()) check_relations(c, reader);
  if (!reader.errors().empty()) {
    std::string message = "invalid config:";
    for (const auto& e : reader.errors()) message += "\n  " + e;
    throw ConfigError(message);
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string canonical_ini(const PipelineConfig& config) {
  Writer w;
  visit(config, w);
  return w.str();
}

std::string section_ini(const PipelineConfig& config, const std::string& section) {
  Writer w(section);
  visit(config, w);
  return w.str();
}

}  // namespace traj::cli
