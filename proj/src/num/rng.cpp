#include "traj/num/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "traj/error.hpp"

namespace traj::num {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) { return mix_seed(mix_seed(base) ^ stream); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t sub) {
  return derive_seed(derive_seed(base, stream), sub);
}

// Distributions are written out by hand so streams are identical across
// standard library implementations.
double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gumbel() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -std::log(-std::log(u));
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("Rng::index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::size_t Rng::categorical(std::span<const double> probs) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!(total > 0.0)) throw Error("Rng::categorical: probabilities sum to zero");
  double u = uniform() * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return probs.size() - 1;
}

Tensor Rng::normal_tensor(std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = normal();
  return t;
}

Tensor Rng::gumbel_tensor(std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = gumbel();
  return t;
}

Tensor Rng::uniform_tensor(std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = uniform(lo, hi);
  return t;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[index(i)]);
  return p;
}

}  // namespace traj::num
