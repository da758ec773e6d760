#include "traj/num/nn.hpp"

#include <cmath>
#include <numeric>

#include "traj/error.hpp"

namespace traj::num {

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Tanh:
      return tanh(x);
    case Activation::Relu:
      return relu(x);
    case Activation::Identity:
      return x;
  }
  return x;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", Tensor::zeros(in, out)), bias(name + ".bias", Tensor::zeros(1, out)) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : weight.value.data()) w = rng.uniform(-limit, limit);
}

Var Linear::operator()(Graph& g, Var x) { return add_row(matmul(x, g.parameter(weight)), g.parameter(bias)); }

void Linear::zero() {
  weight.value.fill(0.0);
  bias.value.fill(0.0);
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output,
         Rng& rng) {
  if (sizes.size() < 2) throw DimensionError("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(name + ".l" + std::to_string(i), sizes[i], sizes[i + 1], rng);
    activations.push_back(i + 2 == sizes.size() ? output : hidden);
  }
}

Var Mlp::operator()(Graph& g, Var x) {
  for (std::size_t i = 0; i < layers.size(); ++i) x = activate(layers[i](g, x), activations[i]);
  return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (Linear& l : layers) l.collect(out);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Linear& l : layers) n += l.weight.value.size() + l.bias.value.size();
  return n;
}

LayerNorm::LayerNorm(const std::string& name, std::size_t width)
    : gain(name + ".gain", Tensor(std::vector<std::size_t>{1, width}, 1.0)),
      bias(name + ".bias", Tensor::zeros(1, width)) {}

Var LayerNorm::operator()(Graph& g, Var x) { return layer_norm_rows(x, g.parameter(gain), g.parameter(bias)); }

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

TransformerBlock::TransformerBlock(const std::string& name, std::size_t w, std::size_t h, Rng& rng)
    : width(w),
      heads(h),
      norm_attn(name + ".ln1", w),
      norm_ff(name + ".ln2", w),
      query(name + ".q", w, w, rng),
      key(name + ".k", w, w, rng),
      value(name + ".v", w, w, rng),
      project(name + ".o", w, w, rng),
      expand(name + ".ff1", w, 4 * w, rng),
      contract(name + ".ff2", 4 * w, w, rng) {
  if (h == 0 || w % h != 0) {
    throw DimensionError("transformer width " + std::to_string(w) + " not divisible by " + std::to_string(h) + " heads");
  }
}

Var TransformerBlock::operator()(Graph& g, Var x, std::size_t sequences, std::size_t length, bool causal) {
  const AttentionShape shape{sequences, length, width, heads, causal};
  Var h = norm_attn(g, x);
  Var attended = attention(query(g, h), key(g, h), value(g, h), shape);
  x = x + project(g, attended);
  Var f = contract(g, relu(expand(g, norm_ff(g, x))));
  return x + f;
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  norm_attn.collect(out);
  query.collect(out);
  key.collect(out);
  value.collect(out);
  project.collect(out);
  norm_ff.collect(out);
  expand.collect(out);
  contract.collect(out);
}

SequenceEncoder::SequenceEncoder(const std::string& name, std::size_t in, std::size_t w, std::size_t heads,
                                 std::size_t nblocks, std::size_t max_length, Rng& rng)
    : input(name + ".in", in, w, rng),
      positions(name + ".pos", Tensor::zeros(max_length, w)),
      final_norm(name + ".ln", w) {
  for (double& p : positions.value.data()) p = 0.1 * rng.normal();
  for (std::size_t b = 0; b < nblocks; ++b) blocks.emplace_back(name + ".b" + std::to_string(b), w, heads, rng);
}

Var SequenceEncoder::operator()(Graph& g, Var x, std::size_t sequences, std::size_t length, bool causal) {
  if (length > max_length()) {
    throw DimensionError("sequence length " + std::to_string(length) + " exceeds positional capacity " +
                         std::to_string(max_length()));
  }
  if (x.rows() != sequences * length) throw DimensionError("encoder input rows do not match sequences*length");
  Var pos = slice_rows(g.parameter(positions), 0, length);
  Var h = input(g, x) + tile_rows(pos, sequences);
  for (TransformerBlock& b : blocks) h = b(g, h, sequences, length, causal);
  return final_norm(g, h);
}

void SequenceEncoder::collect(std::vector<Parameter*>& out) {
  input.collect(out);
  out.push_back(&positions);
  for (TransformerBlock& b : blocks) b.collect(out);
  final_norm.collect(out);
}

std::size_t count_parameters(const std::vector<Parameter*>& params) {
  return std::accumulate(params.begin(), params.end(), std::size_t{0},
                         [](std::size_t n, const Parameter* p) { return n + p->value.size(); });
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace traj::num
