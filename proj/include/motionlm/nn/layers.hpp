// Parameterized modules over the tape: linear, conv, layer norm, embedding,
// and a pre-LN transformer block. Modules own their parameters; collect()
// exposes them to the optimizer and checkpointing in a stable order.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "motionlm/nn/graph.hpp"

namespace motionlm::nn {

template <typename T>
struct LinearT {
  ParameterT<T> w, b;

  LinearT() = default;
  LinearT(const std::string& name, int in, int out, Rng& rng, double init_std = -1) {
    if (init_std < 0) init_std = std::sqrt(2.0 / (in + out));
    w = ParameterT<T>(name + ".w", TensorT<T>::randn({out, in}, rng, init_std));
    b = ParameterT<T>(name + ".b", TensorT<T>::zeros({out}));
  }
  int operator()(GraphT<T>& g, int x) { return g.linear(x, g.param(w), g.param(b)); }
  void collect(std::vector<ParameterT<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename T>
struct Conv1dT {
  ParameterT<T> w, b;  // w is [out, in*k]
  int kernel = 1, stride = 1, pad = 0;

  Conv1dT() = default;
  Conv1dT(const std::string& name, int in, int out, int k, int s, int p, Rng& rng) {
    kernel = k;
    stride = s;
    pad = p;
    double init_std = std::sqrt(2.0 / (in * k));  // He init; conv stacks use relu
    w = ParameterT<T>(name + ".w", TensorT<T>::randn({out, in * k}, rng, init_std));
    b = ParameterT<T>(name + ".b", TensorT<T>::zeros({out}));
  }
  int operator()(GraphT<T>& g, int x) {
    return g.conv1d(x, g.param(w), g.param(b), kernel, stride, pad);
  }
  void collect(std::vector<ParameterT<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename T>
struct LayerNormT {
  ParameterT<T> gain, bias;

  LayerNormT() = default;
  LayerNormT(const std::string& name, int d) {
    gain = ParameterT<T>(name + ".gain", TensorT<T>::full({d}, T(1)));
    bias = ParameterT<T>(name + ".bias", TensorT<T>::zeros({d}));
  }
  int operator()(GraphT<T>& g, int x) { return g.layer_norm(x, g.param(gain), g.param(bias)); }
  void collect(std::vector<ParameterT<T>*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
};

template <typename T>
struct EmbeddingT {
  ParameterT<T> table;  // [vocab, d]

  EmbeddingT() = default;
  EmbeddingT(const std::string& name, int vocab, int d, Rng& rng, double init_std = 0.02) {
    table = ParameterT<T>(name, TensorT<T>::randn({vocab, d}, rng, init_std));
  }
  int operator()(GraphT<T>& g, const std::vector<int>& ids) {
    return g.embedding(g.param(table), ids);
  }
  void collect(std::vector<ParameterT<T>*>& out) { out.push_back(&table); }
};

// Pre-LN block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <typename T>
struct TransformerBlockT {
  LayerNormT<T> ln1, ln2;
  LinearT<T> qkv, attn_proj, fc, mlp_proj;
  int d_model = 0, heads = 1;
  double dropout_p = 0.0;

  TransformerBlockT() = default;
  TransformerBlockT(const std::string& name, int d, int h, Rng& rng, double drop = 0.0)
      : ln1(name + ".ln1", d),
        ln2(name + ".ln2", d),
        qkv(name + ".qkv", d, 3 * d, rng, 0.02),
        attn_proj(name + ".attn_proj", d, d, rng, 0.02),
        fc(name + ".fc", d, 4 * d, rng, 0.02),
        mlp_proj(name + ".mlp_proj", 4 * d, d, rng, 0.02),
        d_model(d),
        heads(h),
        dropout_p(drop) {}

  int operator()(GraphT<T>& g, int x, const SeqLayout& seqs, Rng* drop_rng = nullptr) {
    int h1 = ln1(g, x);
    int qkv_out = qkv(g, h1);
    int q = g.slice_cols(qkv_out, 0, d_model);
    int k = g.slice_cols(qkv_out, d_model, d_model);
    int v = g.slice_cols(qkv_out, 2 * d_model, d_model);
    int att = g.causal_attention(q, k, v, heads, seqs);
    int att_p = attn_proj(g, att);
    if (drop_rng && dropout_p > 0) att_p = g.dropout(att_p, dropout_p, *drop_rng);
    int x1 = g.add(x, att_p);
    int h2 = ln2(g, x1);
    int m = mlp_proj(g, g.gelu(fc(g, h2)));
    if (drop_rng && dropout_p > 0) m = g.dropout(m, dropout_p, *drop_rng);
    return g.add(x1, m);
  }

  void collect(std::vector<ParameterT<T>*>& out) {
    ln1.collect(out);
    ln2.collect(out);
    qkv.collect(out);
    attn_proj.collect(out);
    fc.collect(out);
    mlp_proj.collect(out);
  }
};

using Linear = LinearT<float>;
using Conv1d = Conv1dT<float>;
using LayerNorm = LayerNormT<float>;
using Embedding = EmbeddingT<float>;
using TransformerBlock = TransformerBlockT<float>;

}  // namespace motionlm::nn
