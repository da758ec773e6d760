#pragma once

#include <cstddef>

// Dense compute kernels behind the autodiff ops. The `kernels` namespace holds
// the OpenMP-parallel versions used by the library; `reference` holds plain
// serial loops kept as the test oracle and benchmark baseline.
//
// Every parallel kernel partitions work by output rows (or by independent
// sequence/head blocks) and keeps the per-element summation order fixed, so
// results do not depend on the thread count.

namespace traj::num {

struct AttentionShape {
  std::size_t sequences = 1;  // independent sequences stacked along rows
  std::size_t length = 1;     // rows per sequence
  std::size_t width = 1;      // model width (columns of q, k, v)
  std::size_t heads = 1;      // width must be divisible by heads
  bool causal = false;
};

namespace kernels {

// c[m x n] (+)= a[m x k] * b[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);
// c[m x n] (+)= a[m x k] * b[n x k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);
// c[m x n] (+)= a[k x m]^T * b[k x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);

// Scaled dot-product multi-head attention. `probs` receives the attention
// weights, laid out [sequence][head][query][key], and must hold
// sequences*heads*length*length doubles.
void attention_forward(const AttentionShape& s, const double* q, const double* k, const double* v,
                       double* probs, double* out);
// Accumulates into dq, dk, dv.
void attention_backward(const AttentionShape& s, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv);

}  // namespace kernels

namespace reference {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate);
void attention_forward(const AttentionShape& s, const double* q, const double* k, const double* v,
                       double* probs, double* out);
void attention_backward(const AttentionShape& s, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv);

}  // namespace reference

}  // namespace traj::num
