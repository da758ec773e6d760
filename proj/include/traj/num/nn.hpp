#pragma once

#include <string>
#include <vector>

#include "traj/num/graph.hpp"
#include "traj/num/ops.hpp"
#include "traj/num/rng.hpp"

namespace traj::num {

enum class Activation { Tanh, Relu, Identity };

Var activate(Var x, Activation a);

// y = x W + b, W stored in x out.
struct Linear {
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var operator()(Graph& g, Var x);
  void zero();
  void collect(std::vector<Parameter*>& out);

  std::size_t in() const { return weight.value.rows(); }
  std::size_t out() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
};

struct Mlp {
  Mlp() = default;
  // sizes = {in, h1, ..., out}; hidden layers use `hidden`, the last `output`.
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output, Rng& rng);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
  std::size_t parameter_count() const;

  std::vector<Linear> layers;
  std::vector<Activation> activations;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);

  Parameter gain;
  Parameter bias;
};

// Pre-norm block: x + Attn(LN(x)), then + FF(LN(.)). Rows are stacked
// sequences of equal length.
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, std::size_t width, std::size_t heads, Rng& rng);

  Var operator()(Graph& g, Var x, std::size_t sequences, std::size_t length, bool causal);
  void collect(std::vector<Parameter*>& out);

  std::size_t width = 0;
  std::size_t heads = 1;
  LayerNorm norm_attn, norm_ff;
  Linear query, key, value, project;
  Linear expand, contract;
};

// Input projection, learned position embeddings, a stack of blocks and a
// final layer norm. Output is (sequences*length) x width.
struct SequenceEncoder {
  SequenceEncoder() = default;
  SequenceEncoder(const std::string& name, std::size_t in, std::size_t width, std::size_t heads, std::size_t blocks,
                  std::size_t max_length, Rng& rng);

  Var operator()(Graph& g, Var x, std::size_t sequences, std::size_t length, bool causal);
  void collect(std::vector<Parameter*>& out);

  std::size_t width() const { return input.out(); }
  std::size_t max_length() const { return positions.value.rows(); }

  Linear input;
  Parameter positions;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
};

std::size_t count_parameters(const std::vector<Parameter*>& params);
void zero_grads(const std::vector<Parameter*>& params);

}  // namespace traj::num
