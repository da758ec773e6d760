#include "traj/num/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace traj::num::kernels {

namespace {

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1u << 15;

bool worth_parallel(std::size_t work) { return work >= kParallelThreshold && omp_get_max_threads() > 1; }

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_parallel(m * k * n))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* c_row = c + i * n;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = a_row[p];
      if (a_ip == 0.0) continue;
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  // b is n x k; transpose once so the inner loop streams contiguous rows.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_parallel(m * k * n))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* c_row = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a_pi = a[p * m + i];
      if (a_pi == 0.0) continue;
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_pi * b_row[j];
    }
  }
}

void attention_forward(const AttentionShape& s, const double* q, const double* k, const double* v,
                       double* probs, double* out) {
  const std::size_t len = s.length;
  const std::size_t width = s.width;
  const std::size_t dh = width / s.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto blocks = static_cast<std::ptrdiff_t>(s.sequences * s.heads);
  const std::size_t work = s.sequences * s.heads * len * len * dh;

#pragma omp parallel for schedule(static) if (worth_parallel(work))
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t seq = static_cast<std::size_t>(blk) / s.heads;
    const std::size_t head = static_cast<std::size_t>(blk) % s.heads;
    const std::size_t row0 = seq * len;
    const std::size_t col0 = head * dh;
    double* p = probs + static_cast<std::size_t>(blk) * len * len;
    for (std::size_t i = 0; i < len; ++i) {
      const double* qi = q + (row0 + i) * width + col0;
      double* pi = p + i * len;
      const std::size_t visible = s.causal ? i + 1 : len;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) {
        const double* kj = k + (row0 + j) * width + col0;
        double dot = 0.0;
        for (std::size_t d = 0; d < dh; ++d) dot += qi[d] * kj[d];
        pi[j] = dot * scale;
        mx = std::max(mx, pi[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        pi[j] = std::exp(pi[j] - mx);
        total += pi[j];
      }
      for (std::size_t j = 0; j < visible; ++j) pi[j] /= total;
      for (std::size_t j = visible; j < len; ++j) pi[j] = 0.0;

      double* oi = out + (row0 + i) * width + col0;
      for (std::size_t d = 0; d < dh; ++d) oi[d] = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double pij = pi[j];
        const double* vj = v + (row0 + j) * width + col0;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += pij * vj[d];
      }
    }
  }
}

void attention_backward(const AttentionShape& s, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv) {
  const std::size_t len = s.length;
  const std::size_t width = s.width;
  const std::size_t dh = width / s.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto blocks = static_cast<std::ptrdiff_t>(s.sequences * s.heads);
  const std::size_t work = s.sequences * s.heads * len * len * dh;

#pragma omp parallel for schedule(static) if (worth_parallel(work))
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t seq = static_cast<std::size_t>(blk) / s.heads;
    const std::size_t head = static_cast<std::size_t>(blk) % s.heads;
    const std::size_t row0 = seq * len;
    const std::size_t col0 = head * dh;
    const double* p = probs + static_cast<std::size_t>(blk) * len * len;
    std::vector<double> dp(len);
    for (std::size_t i = 0; i < len; ++i) {
      const double* pi = p + i * len;
      const double* doi = dout + (row0 + i) * width + col0;
      const std::size_t visible = s.causal ? i + 1 : len;
      double weighted = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double* vj = v + (row0 + j) * width + col0;
        double acc = 0.0;
        for (std::size_t d = 0; d < dh; ++d) acc += doi[d] * vj[d];
        dp[j] = acc;
        weighted += pi[j] * acc;
        double* dvj = dv + (row0 + j) * width + col0;
        for (std::size_t d = 0; d < dh; ++d) dvj[d] += pi[j] * doi[d];
      }
      const double* qi = q + (row0 + i) * width + col0;
      double* dqi = dq + (row0 + i) * width + col0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double ds = pi[j] * (dp[j] - weighted) * scale;
        if (ds == 0.0) continue;
        const double* kj = k + (row0 + j) * width + col0;
        double* dkj = dk + (row0 + j) * width + col0;
        for (std::size_t d = 0; d < dh; ++d) {
          dqi[d] += ds * kj[d];
          dkj[d] += ds * qi[d];
        }
      }
    }
  }
}

}  // namespace traj::num::kernels
