#include "traj/env/dataset.hpp"

#include <cmath>
#include <cstring>
#include <optional>

#include "traj/error.hpp"
#include "traj/io/binary.hpp"

namespace traj::env {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'J', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<LevelStats> AbilityDataset::level_stats() const {
  std::vector<LevelStats> stats(static_cast<std::size_t>(std::max(levels, 0)));
  for (int l = 0; l < levels; ++l) stats[static_cast<std::size_t>(l)].level = l + 1;
  for (const Trajectory& t : trajectories) {
    auto& s = stats.at(static_cast<std::size_t>(t.eval_labels().ability - 1));
    ++s.count;
    s.mean += t.eval_labels().return_label;
  }
  for (auto& s : stats) {
    if (s.count > 0) s.mean /= static_cast<double>(s.count);
  }
  for (const Trajectory& t : trajectories) {
    auto& s = stats[static_cast<std::size_t>(t.eval_labels().ability - 1)];
    const double d = t.eval_labels().return_label - s.mean;
    s.std += d * d;
  }
  for (auto& s : stats) {
    if (s.count > 0) s.std = std::sqrt(s.std / static_cast<double>(s.count));
  }
  return stats;
}

void check_separation(const std::vector<LevelStats>& stats, double min_gap_sigmas) {
  for (std::size_t i = 0; i + 1 < stats.size(); ++i) {
    const LevelStats& lo = stats[i];
    const LevelStats& hi = stats[i + 1];
    const double pooled = std::sqrt(0.5 * (lo.std * lo.std + hi.std * hi.std));
    const double gap = hi.mean - lo.mean;
    if (!(gap > 0.0) || gap < min_gap_sigmas * pooled) {
      throw GenerationError("return bands of levels " + std::to_string(lo.level) + " and " +
                            std::to_string(hi.level) + " overlap: mean gap " + std::to_string(gap) + " vs " +
                            std::to_string(min_gap_sigmas) + " x pooled std " + std::to_string(pooled));
    }
  }
}

AbilityDataset generate_dataset(const EnvSpec& spec, int levels, std::size_t per_level, std::uint64_t seed,
                                const ControllerBands& bands, double min_gap_sigmas) {
  if (per_level < 1) throw GenerationError("per-level trajectory count must be at least 1");
  if (levels < 1) throw GenerationError("need at least one ability level");
  const auto env = make_env(spec);
  std::vector<ScriptedController> controllers;
  for (int l = 1; l <= levels; ++l) controllers.push_back(scripted_policy(l, levels, spec, bands));

  const std::size_t total = static_cast<std::size_t>(levels) * per_level;
  std::vector<Trajectory> out;
  out.reserve(total);
  std::vector<std::optional<Trajectory>> slots(total);
  const auto count = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::size_t level = idx / per_level;
    num::Rng rng(num::derive_seed(seed, level + 1, idx % per_level));
    const ScriptedController& c = controllers[level];
    Rollout r = rollout(*env, env->initial_state(rng), [&](std::span<const double> x) { return c.act(*env, x, rng); });
    slots[idx].emplace(idx, std::move(r.states), std::move(r.actions),
                       EvalLabels{r.total_return, static_cast<int>(level) + 1});
  }
  for (auto& s : slots) out.push_back(std::move(*s));

  AbilityDataset d{spec, levels, std::move(out)};
  check_separation(d.level_stats(), min_gap_sigmas);
  return d;
}

std::string encode_dataset(const AbilityDataset& d) {
  nlohmann::json header;
  header["env"] = to_json(d.spec);
  header["levels"] = d.levels;
  header["trajectories"] = nlohmann::json::array();
  for (const Trajectory& t : d.trajectories) {
    header["trajectories"].push_back(
        {{"id", t.id()}, {"ability", t.eval_labels().ability}, {"length", t.length()}});
  }
  const std::string text = header.dump();
  io::ByteWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  for (const Trajectory& t : d.trajectories) {
    w.f64(t.eval_labels().return_label);
    for (double v : t.view().states().data()) w.f64(v);
    for (double v : t.view().actions().data()) w.f64(v);
  }
  return w.take();
}

AbilityDataset decode_dataset(const std::string& bytes) {
  io::ByteReader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof(magic), "dataset magic");
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ParseError("not a .trajset file", 0);
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw ParseError("unsupported .trajset version " + std::to_string(version), version_at);
  }
  const std::uint64_t length_at = r.offset();
  const std::uint64_t header_len = r.u64("header length");
  if (header_len > r.remaining()) throw ParseError("header length exceeds file size", length_at);
  const std::uint64_t header_at = r.offset();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.string(header_len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what(), header_at);
  }

  AbilityDataset d;
  try {
    d.spec = spec_from_json(header.at("env"));
    d.levels = header.at("levels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid header: ") + e.what(), header_at);
  } catch (const traj::Error& e) {
    throw ParseError(std::string("invalid environment in header: ") + e.what(), header_at);
  }
  const auto env = make_env(d.spec);
  const std::size_t sd = d.spec.state_dim, ad = d.spec.action_dim;
  for (const auto& entry : header.at("trajectories")) {
    const auto id = entry.at("id").get<std::uint64_t>();
    const int ability = entry.at("ability").get<int>();
    const auto length = entry.at("length").get<std::size_t>();
    const std::uint64_t at = r.offset();
    if (ability < 1 || ability > d.levels) {
      throw ParseError("trajectory " + std::to_string(id) + " has ability tag outside 1.." + std::to_string(d.levels), at);
    }
    if (length == 0 || length * (sd + ad) * sizeof(double) > r.remaining()) {
      throw ParseError("trajectory " + std::to_string(id) + " length exceeds remaining payload", at);
    }
    const double ret = r.f64("return label");
    std::vector<double> s(length * sd), a(length * ad);
    for (double& v : s) v = r.f64("states");
    for (double& v : a) v = r.f64("actions");
    Trajectory t(id, num::Tensor::matrix(length, sd, std::move(s)), num::Tensor::matrix(length, ad, std::move(a)),
                 EvalLabels{ret, ability});
    const auto view = t.view();
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t j = 0; j < ad; ++j) {
        const double v = view.actions()(i, j);
        if (v < d.spec.action_low[j] || v > d.spec.action_high[j]) {
          throw ParseError("trajectory " + std::to_string(id) + " action out of bounds", at);
        }
      }
    }
    if (std::abs(recompute_return(*env, view) - ret) > 1e-9 * std::max(1.0, std::abs(ret))) {
      throw ParseError("trajectory " + std::to_string(id) + " return label disagrees with its rewards", at);
    }
    d.trajectories.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after payload", r.offset());
  return d;
}

void write_dataset(const std::filesystem::path& path, const AbilityDataset& d) {
  io::write_file(path, encode_dataset(d));
}

AbilityDataset read_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace traj::env
