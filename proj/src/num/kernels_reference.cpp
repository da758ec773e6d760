#include <cmath>
#include <limits>
#include <vector>

#include "traj/num/kernels.hpp"

namespace traj::num::reference {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

namespace {

// Gathers one head of one sequence into a dense len x dh matrix.
std::vector<double> head_block(const AttentionShape& s, const double* x, std::size_t seq, std::size_t head) {
  const std::size_t dh = s.width / s.heads;
  std::vector<double> out(s.length * dh);
  for (std::size_t i = 0; i < s.length; ++i) {
    for (std::size_t d = 0; d < dh; ++d) out[i * dh + d] = x[(seq * s.length + i) * s.width + head * dh + d];
  }
  return out;
}

}  // namespace

void attention_forward(const AttentionShape& s, const double* q, const double* k, const double* v,
                       double* probs, double* out) {
  const std::size_t len = s.length;
  const std::size_t dh = s.width / s.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t seq = 0; seq < s.sequences; ++seq) {
    for (std::size_t head = 0; head < s.heads; ++head) {
      auto qh = head_block(s, q, seq, head);
      auto kh = head_block(s, k, seq, head);
      auto vh = head_block(s, v, seq, head);
      std::vector<double> scores(len * len);
      gemm_nt(len, dh, len, qh.data(), kh.data(), scores.data(), false);
      double* p = probs + (seq * s.heads + head) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t visible = s.causal ? i + 1 : len;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, scores[i * len + j] * scale);
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          p[i * len + j] = j < visible ? std::exp(scores[i * len + j] * scale - mx) : 0.0;
          total += p[i * len + j];
        }
        for (std::size_t j = 0; j < len; ++j) p[i * len + j] /= total;
      }
      std::vector<double> oh(len * dh);
      gemm_nn(len, len, dh, p, vh.data(), oh.data(), false);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t d = 0; d < dh; ++d) out[(seq * len + i) * s.width + head * dh + d] = oh[i * dh + d];
      }
    }
  }
}

void attention_backward(const AttentionShape& s, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv) {
  const std::size_t len = s.length;
  const std::size_t dh = s.width / s.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t seq = 0; seq < s.sequences; ++seq) {
    for (std::size_t head = 0; head < s.heads; ++head) {
      auto qh = head_block(s, q, seq, head);
      auto kh = head_block(s, k, seq, head);
      auto vh = head_block(s, v, seq, head);
      auto doh = head_block(s, dout, seq, head);
      const double* p = probs + (seq * s.heads + head) * len * len;
      // dP = dO V^T ; dV = P^T dO ; dS = P * (dP - rowsum(P * dP))
      std::vector<double> dp(len * len), dvh(len * dh), ds(len * len), dqh(len * dh), dkh(len * dh);
      gemm_nt(len, dh, len, doh.data(), vh.data(), dp.data(), false);
      gemm_tn(len, len, dh, p, doh.data(), dvh.data(), false);
      for (std::size_t i = 0; i < len; ++i) {
        double rowsum = 0.0;
        for (std::size_t j = 0; j < len; ++j) rowsum += p[i * len + j] * dp[i * len + j];
        for (std::size_t j = 0; j < len; ++j) ds[i * len + j] = p[i * len + j] * (dp[i * len + j] - rowsum) * scale;
      }
      gemm_nn(len, len, dh, ds.data(), kh.data(), dqh.data(), false);
      gemm_tn(len, len, dh, ds.data(), qh.data(), dkh.data(), false);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t d = 0; d < dh; ++d) {
          const std::size_t idx = (seq * len + i) * s.width + head * dh + d;
          dq[idx] += dqh[i * dh + d];
          dk[idx] += dkh[i * dh + d];
          dv[idx] += dvh[i * dh + d];
        }
      }
    }
  }
}

}  // namespace traj::num::reference
