#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "traj/num/tensor.hpp"

namespace traj::num {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t sub);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double gumbel();
  bool bernoulli(double p);
  std::size_t index(std::size_t n);
  std::size_t categorical(std::span<const double> probs);

  Tensor normal_tensor(std::size_t rows, std::size_t cols);
  Tensor gumbel_tensor(std::size_t rows, std::size_t cols);
  Tensor uniform_tensor(std::size_t rows, std::size_t cols, double lo, double hi);
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace traj::num
