#include "traj/hssm/model.hpp"

#include <cmath>
#include <numbers>

#include "traj/error.hpp"

namespace traj::hssm {

using num::Graph;
using num::Tensor;
using num::Var;

HssmModel::HssmModel(const HssmConfig& c, std::size_t sd, std::size_t ad, num::Rng& rng)
    : config(c),
      state_dim(sd),
      action_dim(ad),
      boundary_encoder("boundary_enc", 2 * sd, c.width, c.heads, 1, c.max_length, rng),
      boundary_head("boundary_head", c.width, 1, rng),
      skill_encoder("skill_enc", sd + ad, c.width, c.heads, 1, c.max_length, rng),
      skill_head("skill_head", c.width, c.skills, rng),
      skill_start("skill_start", Tensor::zeros(1, c.skills)),
      skill_coupling("skill_coupling", rng.uniform_tensor(c.skills, c.skills, -0.1, 0.1)),
      prior_state("prior_state", sd, c.skills, rng),
      prior_start("prior_start", Tensor::zeros(1, c.skills)),
      prior_coupling("prior_coupling", rng.uniform_tensor(c.skills, c.skills, -0.1, 0.1)),
      abstraction("abstraction", sd, c.abstraction, rng),
      skill_embedding("skill_embedding", rng.uniform_tensor(c.skills, c.abstraction, -1.0, 1.0)),
      boundary_prior("boundary_prior", c.abstraction, 1, rng),
      decoder("decoder", {c.abstraction, c.decoder_hidden, 2 * ad}, num::Activation::Tanh, num::Activation::Identity,
              rng),
      skill_prior_logits("skill_prior_logits", Tensor::zeros(1, c.skills)) {
  if (c.skills < 1) throw Error("hssm needs at least one skill");
}

void HssmModel::collect(std::vector<num::Parameter*>& out) {
  boundary_encoder.collect(out);
  boundary_head.collect(out);
  skill_encoder.collect(out);
  skill_head.collect(out);
  out.push_back(&skill_start);
  out.push_back(&skill_coupling);
  prior_state.collect(out);
  out.push_back(&prior_start);
  out.push_back(&prior_coupling);
  abstraction.collect(out);
  out.push_back(&skill_embedding);
  boundary_prior.collect(out);
  decoder.collect(out);
  out.push_back(&skill_prior_logits);
}

std::vector<num::Parameter*> HssmModel::parameters() {
  std::vector<num::Parameter*> out;
  collect(out);
  return out;
}

void HssmModel::store(num::TensorMap& map, const std::string& prefix) {
  num::store_parameters(map, prefix, parameters());
  map[prefix + "meta"] = Tensor::row({static_cast<double>(config.skills), static_cast<double>(config.abstraction),
                                      static_cast<double>(config.width), static_cast<double>(config.heads),
                                      static_cast<double>(config.max_length), static_cast<double>(config.decoder_hidden),
                                      static_cast<double>(state_dim), static_cast<double>(action_dim)});
}

void HssmModel::load(const num::TensorMap& map, const std::string& prefix) {
  num::load_parameters(map, prefix, parameters());
}

ElboTables build_tables(Graph& g, HssmModel& model, const std::vector<env::StateActionView>& batch) {
  if (batch.empty()) throw Error("hssm: empty batch");
  const std::size_t B = batch.size();
  const std::size_t T = batch[0].length();
  const std::size_t l = model.config.skills;
  const std::size_t sd = model.state_dim, ad = model.action_dim;
  for (const auto& v : batch) {
    if (v.length() != T) throw DimensionError("hssm: trajectories in a batch must share their length");
    if (v.state_dim() != sd || v.action_dim() != ad) throw DimensionError("hssm: trajectory dims do not match model");
  }
  if (T > model.config.max_length) {
    throw DimensionError("trajectory length " + std::to_string(T) + " exceeds positional capacity " +
                         std::to_string(model.config.max_length));
  }

  Tensor states = Tensor::zeros(B * T, sd), deltas = Tensor::zeros(B * T, sd), actions = Tensor::zeros(B * T, ad);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < sd; ++i) {
        states(b * T + t, i) = batch[b].states()(t, i);
        deltas(b * T + t, i) = t == 0 ? 0.0 : batch[b].states()(t, i) - batch[b].states()(t - 1, i);
      }
      for (std::size_t i = 0; i < ad; ++i) actions(b * T + t, i) = batch[b].actions()(t, i);
    }
  }
  Var x = g.constant(states);
  Var a = g.constant(actions);

  Var boundary = model.boundary_head(g, model.boundary_encoder(g, num::concat_cols({x, g.constant(deltas)}), B, T, true));
  Var qbase = model.skill_head(g, model.skill_encoder(g, num::concat_cols({x, a}), B, T, false));
  Var pbase = model.prior_state(g, x);

  // Abstractions for every (b, t, j): row (b*T + t)*l + j.
  Var s = num::tanh(num::repeat_rows(model.abstraction(g, x), l) +
                    num::tile_rows(g.parameter(model.skill_embedding), B * T));
  Var dec = model.decoder(g, s);
  Var mean = num::slice_cols(dec, 0, ad);
  Var log_std = num::add_scalar(num::scale(num::tanh(num::slice_cols(dec, ad, ad)), 3.5), -1.5);
  Var z = (g.constant(num::repeat_rows(a, l).value()) - mean) * num::exp(num::neg(log_std));
  Var log_density = num::add_scalar(
      num::neg(num::sum_cols(num::scale(num::square(z), 0.5) + log_std)),
      -0.5 * static_cast<double>(ad) * std::log(2.0 * std::numbers::pi));
  Var loga_all = num::reshape(log_density, B * T, l);
  Var pm_all = num::reshape(model.boundary_prior(g, s), B * T, l);

  ElboTables tab;
  tab.batch = B;
  tab.skills = l;
  tab.length = T;
  auto rows_at = [&](std::size_t t) {
    std::vector<std::size_t> idx(B);
    for (std::size_t b = 0; b < B; ++b) idx[b] = b * T + t;
    return idx;
  };
  Var q_coupling = num::tile_rows(g.parameter(model.skill_coupling), B);
  Var p_coupling = num::tile_rows(g.parameter(model.prior_coupling), B);
  for (std::size_t t = 0; t < T; ++t) {
    const auto idx = rows_at(t);
    tab.loga.push_back(num::gather_rows(loga_all, idx));
    Var qb = num::gather_rows(qbase, idx);
    Var pb = num::gather_rows(pbase, idx);
    if (t == 0) {
      tab.qm_logit.push_back(num::gather_rows(boundary, idx));
      tab.pm_logit.push_back(Var());
      tab.log_qnew.push_back(num::log_softmax_rows(num::add_row(qb, g.parameter(model.skill_start))));
      tab.log_pnew.push_back(num::log_softmax_rows(num::add_row(pb, g.parameter(model.prior_start))));
    } else {
      tab.qm_logit.push_back(num::gather_rows(boundary, idx));
      tab.pm_logit.push_back(num::gather_rows(pm_all, rows_at(t - 1)));
      tab.log_qnew.push_back(num::log_softmax_rows(num::repeat_rows(qb, l) + q_coupling));
      tab.log_pnew.push_back(num::log_softmax_rows(num::repeat_rows(pb, l) + p_coupling));
    }
  }
  tab.log_skill_prior = num::log_softmax_rows(g.parameter(model.skill_prior_logits));
  return tab;
}

}  // namespace traj::hssm
