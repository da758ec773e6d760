#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "traj/env/env.hpp"
#include "traj/iq/agent.hpp"
#include "traj/num/ops.hpp"
#include "traj/vte/train.hpp"

namespace traj::testing {

using num::Graph;
using num::Parameter;
using num::Rng;
using num::Tensor;
using num::Var;

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

namespace {

std::vector<double> log_normalize(std::vector<double> v) {
  const double z = log_sum_exp(v);
  for (double& x : v) x -= z;
  return v;
}

}  // namespace

TabularSkillModel::TabularSkillModel(std::size_t length, std::size_t skills, Rng& rng)
    : length(length), skills(skills) {
  q_first = Parameter("qf", rng.uniform_tensor(1, skills, -2, 2));
  p_first = Parameter("pf", rng.uniform_tensor(1, skills, -2, 2));
  prior_logits = Parameter("pz", rng.uniform_tensor(1, skills, -1, 1));
  for (std::size_t t = 0; t < length; ++t) {
    loga.emplace_back("la", rng.uniform_tensor(1, skills, -3, 0));
    if (t == 0) continue;
    q_next.emplace_back("qn", rng.uniform_tensor(skills, skills, -2, 2));
    p_next.emplace_back("pn", rng.uniform_tensor(skills, skills, -2, 2));
    q_boundary.emplace_back("qm", rng.uniform_tensor(1, 1, -2, 2));
    p_boundary.emplace_back("pm", rng.uniform_tensor(1, skills, -2, 2));
  }
}

std::vector<Parameter*> TabularSkillModel::params() {
  std::vector<Parameter*> out{&q_first, &p_first, &prior_logits};
  for (auto* group : {&q_next, &p_next, &q_boundary, &p_boundary, &loga}) {
    for (auto& p : *group) out.push_back(&p);
  }
  return out;
}

hssm::ElboTables TabularSkillModel::tables(Graph& g) {
  hssm::ElboTables tab;
  tab.batch = 1;
  tab.skills = skills;
  tab.length = length;
  for (std::size_t t = 0; t < length; ++t) {
    tab.loga.push_back(g.parameter(loga[t]));
    if (t == 0) {
      tab.log_qnew.push_back(num::log_softmax_rows(g.parameter(q_first)));
      tab.log_pnew.push_back(num::log_softmax_rows(g.parameter(p_first)));
      tab.qm_logit.push_back(g.constant(Tensor::scalar(0.0)));
      tab.pm_logit.push_back(Var());
    } else {
      tab.log_qnew.push_back(num::log_softmax_rows(g.parameter(q_next[t - 1])));
      tab.log_pnew.push_back(num::log_softmax_rows(g.parameter(p_next[t - 1])));
      tab.qm_logit.push_back(g.parameter(q_boundary[t - 1]));
      tab.pm_logit.push_back(g.parameter(p_boundary[t - 1]));
    }
  }
  tab.log_skill_prior = num::log_softmax_rows(g.parameter(prior_logits));
  return tab;
}

std::vector<double> TabularSkillModel::row_log_probs(const Parameter& p, std::size_t row) const {
  std::vector<double> v(skills);
  for (std::size_t k = 0; k < skills; ++k) v[k] = p.value(row, k);
  return log_normalize(v);
}

PathEnumeration enumerate_paths(const TabularSkillModel& inst) {
  const std::size_t T = inst.length, l = inst.skills;
  PathEnumeration out;
  std::size_t z_paths = 1;
  for (std::size_t t = 0; t < T; ++t) z_paths *= l;
  for (std::size_t zc = 0; zc < z_paths; ++zc) {
    std::vector<std::size_t> z(T);
    for (std::size_t t = 0, c = zc; t < T; ++t, c /= l) z[t] = c % l;
    for (std::size_t mc = 0; mc < (std::size_t{1} << (T - 1)); ++mc) {
      std::vector<int> m(T, 1);
      bool consistent = true;
      for (std::size_t t = 1; t < T; ++t) {
        m[t] = static_cast<int>((mc >> (t - 1)) & 1);
        if (m[t] == 0 && z[t] != z[t - 1]) consistent = false;
      }
      if (!consistent) continue;
      double lp = inst.row_log_probs(inst.p_first, 0)[z[0]] + inst.loga[0].value[z[0]];
      double lq = inst.row_log_probs(inst.q_first, 0)[z[0]];
      for (std::size_t t = 1; t < T; ++t) {
        const double pm = inst.p_boundary[t - 1].value[z[t - 1]];
        const double qm = inst.q_boundary[t - 1].value[0];
        lp += m[t] ? log_sigmoid(pm) : log_sigmoid(-pm);
        lq += m[t] ? log_sigmoid(qm) : log_sigmoid(-qm);
        if (m[t]) {
          lp += inst.row_log_probs(inst.p_next[t - 1], z[t - 1])[z[t]];
          lq += inst.row_log_probs(inst.q_next[t - 1], z[t - 1])[z[t]];
        }
        lp += inst.loga[t].value[z[t]];
      }
      out.log_p.push_back(lp);
      out.log_q.push_back(lq);
      out.z.push_back(z);
      out.m.push_back(m);
    }
  }
  return out;
}

double enumerated_log_likelihood(const TabularSkillModel& inst) { return log_sum_exp(enumerate_paths(inst).log_p); }

double enumerated_elbo(const TabularSkillModel& inst) {
  const auto e = enumerate_paths(inst);
  double elbo = 0.0;
  for (std::size_t i = 0; i < e.log_p.size(); ++i) {
    const double w = std::exp(e.log_q[i]);
    if (w > 0.0) elbo += w * (e.log_p[i] - e.log_q[i]);
  }
  return elbo;
}

double exact_elbo_value(TabularSkillModel& inst) {
  Graph g(false);
  return hssm::exact_elbo(g, inst.tables(g)).elbo.value().item();
}

// With the boundary pattern fixed, the z posterior is a Markov chain whose
// transitions follow from pairwise marginals of the enumeration.
void set_posterior_for_fixed_boundaries(TabularSkillModel& inst) {
  const std::size_t T = inst.length, l = inst.skills;
  const auto e = enumerate_paths(inst);
  const double log_z = log_sum_exp(e.log_p);
  std::vector<double> first(l, 0.0);
  std::vector<std::vector<double>> pair(T, std::vector<double>(l * l, 0.0));
  for (std::size_t i = 0; i < e.log_p.size(); ++i) {
    const double w = std::exp(e.log_p[i] - log_z);
    first[e.z[i][0]] += w;
    for (std::size_t t = 1; t < T; ++t) pair[t][e.z[i][t - 1] * l + e.z[i][t]] += w;
  }
  for (std::size_t k = 0; k < l; ++k) inst.q_first.value[k] = std::log(std::max(first[k], 1e-300));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < l; ++j) {
      double row = 0.0;
      for (std::size_t k = 0; k < l; ++k) row += pair[t][j * l + k];
      for (std::size_t k = 0; k < l; ++k) {
        inst.q_next[t - 1].value(j, k) = row > 0.0 ? std::log(std::max(pair[t][j * l + k] / row, 1e-300)) : 0.0;
      }
    }
  }
}

void make_posterior_exact(TabularSkillModel& inst, Rng& rng) {
  // sigmoid(34.5) rounds to 1 - 1e-15, so both sides are deterministic.
  for (std::size_t t = 1; t < inst.length; ++t) {
    const double logit = rng.bernoulli(0.5) ? 34.5 : -34.5;
    inst.p_boundary[t - 1].value.fill(logit);
    inst.q_boundary[t - 1].value[0] = logit;
  }
  set_posterior_for_fixed_boundaries(inst);
}

double kld_monte_carlo(double mu, double sigma, std::size_t samples, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double eps = rng.normal();
    const double e = mu + sigma * eps;
    // log q(e) - log p(e); the 2 pi terms cancel.
    total += -0.5 * eps * eps - std::log(sigma) + 0.5 * e * e;
  }
  return total / static_cast<double>(samples);
}

double sequence_vs_bc_gradient_gap(const env::AbilityDataset& data, std::size_t trajectory, std::uint64_t seed) {
  const auto view = data.trajectories.at(trajectory).view();
  auto world = env::make_env(data.spec);
  Rng rng(seed);
  vte::SquashedGaussianPolicy policy("pi", data.spec.state_dim, 2, data.spec.action_low, data.spec.action_high, {6},
                                     rng);
  const Tensor embedding = rng.uniform_tensor(1, 2, -1, 1);

  auto gradients = [&](bool full) {
    auto params = policy.parameters();
    num::zero_grads(params);
    Graph g;
    Var loglik = num::neg(vte::reconstruction_loss(g, policy, view, g.constant(embedding)));
    if (full) {
      // Standard normal initial state and Gaussian transitions around the
      // deterministic step; no term depends on the policy parameters.
      double dynamics = 0.0;
      for (std::size_t k = 0; k < view.states().cols(); ++k) dynamics += -0.5 * std::pow(view.states()(0, k), 2);
      for (std::size_t t = 0; t + 1 < view.length(); ++t) {
        const auto next = world->step(view.states().row_span(t), view.actions().row_span(t)).next_state;
        for (std::size_t k = 0; k < next.size(); ++k) {
          const double r = (view.states()(t + 1, k) - next[k]) / 0.1;
          dynamics += -0.5 * r * r - std::log(0.1 * std::sqrt(2.0 * std::numbers::pi));
        }
      }
      loglik = num::add_scalar(loglik, dynamics);
    }
    g.backward(loglik);
    std::vector<double> flat;
    for (auto* p : params) flat.insert(flat.end(), p->grad.data().begin(), p->grad.data().end());
    return flat;
  };
  const auto bc = gradients(false), full = gradients(true);
  double worst = 0.0;
  for (std::size_t i = 0; i < bc.size(); ++i) worst = std::max(worst, std::abs(bc[i] - full[i]));
  return worst;
}

TabularMdp random_tabular_mdp(std::size_t states, std::size_t actions, double gamma, Rng& rng) {
  auto simplex = [&](std::size_t n) {
    std::vector<double> p(n);
    double z = 0.0;
    for (auto& v : p) z += (v = rng.uniform(0.05, 1.0));
    for (auto& v : p) v /= z;
    return p;
  };
  TabularMdp mdp{states, actions, gamma, {}, {}, {}, {}};
  mdp.policy.resize(states);
  mdp.transition.assign(states, std::vector<std::vector<double>>(actions));
  for (std::size_t s = 0; s < states; ++s) {
    mdp.policy[s] = simplex(actions);
    for (std::size_t a = 0; a < actions; ++a) mdp.transition[s][a] = simplex(states);
  }
  mdp.start = simplex(states);
  // d = (1 - gamma) rho0 + gamma P_pi^T d
  const auto n = static_cast<Eigen::Index>(states);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (std::size_t s = 0; s < states; ++s) {
    rhs(static_cast<Eigen::Index>(s)) = (1.0 - gamma) * mdp.start[s];
    for (std::size_t a = 0; a < actions; ++a) {
      for (std::size_t t = 0; t < states; ++t) {
        system(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) -=
            gamma * mdp.policy[s][a] * mdp.transition[s][a][t];
      }
    }
  }
  const Eigen::VectorXd d = system.partialPivLu().solve(rhs);
  mdp.occupancy.assign(d.data(), d.data() + n);
  return mdp;
}

double telescoping_residual(const TabularMdp& mdp, const std::vector<double>& value) {
  const std::size_t S = mdp.states, A = mdp.actions, rows = S * A * S;
  Tensor weights = Tensor::zeros(rows, 1), vs = Tensor::zeros(rows, 1), vn = Tensor::zeros(rows, 1);
  const Tensor not_done(std::vector<std::size_t>{rows, 1}, 1.0);
  std::size_t r = 0;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t t = 0; t < S; ++t, ++r) {
        weights(r, 0) = mdp.occupancy[s] * mdp.policy[s][a] * mdp.transition[s][a][t];
        vs(r, 0) = value[s];
        vn(r, 0) = value[t];
      }
    }
  }
  Graph g;
  const double lhs = iq::telescoped_value(g.constant(vs), g.constant(vn), not_done, weights, mdp.gamma).value().item();
  double initial = 0.0;
  for (std::size_t s = 0; s < S; ++s) initial += mdp.start[s] * value[s];
  return std::abs(lhs - (1.0 - mdp.gamma) * initial);
}

double wasserstein_enumerated(const Tensor& a, const Tensor& b) {
  std::vector<std::size_t> perm(a.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      double sq = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sq += std::pow(a(i, k) - b(perm[i], k), 2);
      cost += std::sqrt(sq);
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.rows());
}

}  // namespace traj::testing
