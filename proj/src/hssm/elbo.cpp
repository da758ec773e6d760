#include "traj/hssm/elbo.hpp"

#include <cmath>

#include "traj/error.hpp"
#include "traj/log.hpp"

namespace traj::hssm {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

Var ones(Graph& g, std::size_t rows) { return g.constant(Tensor(std::vector<std::size_t>{rows, 1}, 1.0)); }

// -(q log q + (1-q) log(1-q)) is the entropy; this returns its negation for a
// Bernoulli with the given logit.
Var neg_entropy(Var logit) {
  return num::sigmoid(logit) * num::log_sigmoid(logit) +
         num::sigmoid(num::neg(logit)) * num::log_sigmoid(num::neg(logit));
}

// E_{m ~ q}[log p(m)] for every column of prior logits (B x l) under a
// posterior logit (B x 1).
Var cross_term(Var q_logit, Var p_logits) {
  return num::mul_col(num::log_sigmoid(p_logits), num::sigmoid(q_logit)) +
         num::mul_col(num::log_sigmoid(num::neg(p_logits)), num::sigmoid(num::neg(q_logit)));
}

ElboTerms finish(Graph& g, const ElboTables& tab, Var recon, Var kl_m, Var kl_z, std::vector<Var> skills,
                 std::vector<Var> boundaries, std::vector<Var> info_z) {
  ElboTerms out;
  out.reconstruction = num::mean(recon);
  out.kl_boundary = num::mean(kl_m);
  out.kl_skill = num::mean(kl_z);
  out.elbo = num::mean(recon - kl_m - kl_z);
  out.loss = num::neg(out.elbo);
  out.info_cost = info_cost(boundaries, info_z, num::exp(tab.log_skill_prior));
  out.skills = std::move(skills);
  out.boundaries = std::move(boundaries);
  return out;
}

void check_tables(const ElboTables& tab) {
  if (tab.length == 0 || tab.loga.size() != tab.length || tab.log_qnew.size() != tab.length ||
      tab.log_pnew.size() != tab.length || tab.qm_logit.size() != tab.length || tab.pm_logit.size() != tab.length) {
    throw DimensionError("hssm: incomplete ELBO tables");
  }
}

}  // namespace

Var info_cost(const std::vector<Var>& m, const std::vector<Var>& z, Var p_z) {
  if (m.size() != z.size() || m.empty()) throw DimensionError("info_cost: boundary and skill sequences differ in length");
  Graph& g = p_z.graph();
  const std::size_t l = p_z.cols();
  for (double v : p_z.value().data()) {
    if (v < 1e-12) {
      log::warn("info_cost: skill prior entry below 1e-12 clamped");
      break;
    }
  }
  Var neg_log_pz = num::neg(num::log(num::clamp(p_z, 1e-12, 1.0 + 1e-9)));
  Var total;
  for (std::size_t t = 0; t < m.size(); ++t) {
    if (z[t].cols() != l) throw DimensionError("info_cost: skill width does not match prior");
    Var step = m[t] * num::sum_cols(num::mul_row(z[t], neg_log_pz));
    total = total.valid() ? total + step : step;
  }
  (void)g;
  return num::mean(total);
}

ElboTerms exact_elbo(Graph& g, const ElboTables& tab) {
  check_tables(tab);
  const std::size_t B = tab.batch, l = tab.skills;
  Var alpha = num::exp(tab.log_qnew[0]);
  Var recon = num::sum_cols(alpha * tab.loga[0]);
  Var kl_z = num::sum_cols(alpha * (tab.log_qnew[0] - tab.log_pnew[0]));
  Var kl_m = g.constant(Tensor::zeros(B, 1));
  std::vector<Var> skills{alpha}, boundaries{ones(g, B)}, info_z{alpha};
  for (std::size_t t = 1; t < tab.length; ++t) {
    Var q_logit = tab.qm_logit[t];
    Var q_new = num::sigmoid(q_logit);
    Var table = num::exp(tab.log_qnew[t]);
    Var mix = num::group_vecmat(alpha, table);
    kl_m = kl_m + neg_entropy(q_logit) - num::sum_cols(alpha * cross_term(q_logit, tab.pm_logit[t]));
    Var kl_rows = num::reshape(num::sum_cols(table * (tab.log_qnew[t] - tab.log_pnew[t])), B, l);
    kl_z = kl_z + q_new * num::sum_cols(alpha * kl_rows);
    Var next = num::mul_col(mix, q_new) + num::mul_col(alpha, num::sigmoid(num::neg(q_logit)));
    recon = recon + num::sum_cols(next * tab.loga[t]);
    alpha = next;
    skills.push_back(alpha);
    boundaries.push_back(q_new);
    info_z.push_back(mix);
  }
  return finish(g, tab, recon, kl_m, kl_z, std::move(skills), std::move(boundaries), std::move(info_z));
}

ElboTerms relaxed_elbo(Graph& g, const ElboTables& tab, double tau, num::Rng& rng) {
  check_tables(tab);
  if (!(tau > 0.0)) throw Error("relaxed_elbo: temperature must be positive");
  const std::size_t B = tab.batch, l = tab.skills;
  Var w = num::gumbel_softmax(tab.log_qnew[0], tau, rng.gumbel_tensor(B, l));
  Var recon = num::sum_cols(w * tab.loga[0]);
  Var kl_z = num::sum_cols(num::exp(tab.log_qnew[0]) * (tab.log_qnew[0] - tab.log_pnew[0]));
  Var kl_m = g.constant(Tensor::zeros(B, 1));
  std::vector<Var> skills{w}, boundaries{ones(g, B)}, info_z{w};
  for (std::size_t t = 1; t < tab.length; ++t) {
    Var q_logit = tab.qm_logit[t];
    Tensor logistic = Tensor::zeros(B, 1);
    for (double& v : logistic.data()) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      v = std::log(u) - std::log1p(-u);
    }
    Var m = num::sigmoid(num::scale(q_logit + g.constant(logistic), 1.0 / tau));
    Var pm = num::sum_cols(w * tab.pm_logit[t]);
    kl_m = kl_m + neg_entropy(q_logit) - cross_term(q_logit, pm);
    Var lq = num::log_softmax_rows(num::group_vecmat(w, tab.log_qnew[t]));
    Var lp = num::log_softmax_rows(num::group_vecmat(w, tab.log_pnew[t]));
    kl_z = kl_z + m * num::sum_cols(num::exp(lq) * (lq - lp));
    Var fresh = num::gumbel_softmax(lq, tau, rng.gumbel_tensor(B, l));
    w = num::mul_col(fresh, m) + num::mul_col(w, g.constant(Tensor(std::vector<std::size_t>{B, 1}, 1.0)) - m);
    recon = recon + num::sum_cols(w * tab.loga[t]);
    skills.push_back(w);
    boundaries.push_back(m);
    info_z.push_back(w);
  }
  return finish(g, tab, recon, kl_m, kl_z, std::move(skills), std::move(boundaries), std::move(info_z));
}

ElboTerms hssm_elbo(Graph& g, HssmModel& model, const std::vector<env::StateActionView>& batch, double tau,
                    std::uint64_t noise_seed) {
  ElboTables tab = build_tables(g, model, batch);
  ElboTerms terms;
  if (tau <= 0.0) {
    terms = exact_elbo(g, tab);
  } else {
    num::Rng rng(noise_seed);
    terms = relaxed_elbo(g, tab, tau, rng);
  }
  if (!std::isfinite(terms.loss.value().item())) throw NumericError("hssm_elbo", terms.loss.id(), "non-finite loss");
  return terms;
}

}  // namespace traj::hssm
