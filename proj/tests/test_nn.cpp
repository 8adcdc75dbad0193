// Kernel tests: finite-difference oracles for every op, hand-computed
// fixtures, causality and determinism checks. FD checks run in double.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "motionlm/nn/gradcheck.hpp"
#include "motionlm/nn/layers.hpp"
#include "motionlm/nn/optim.hpp"

using namespace motionlm;
using nn::GraphT;
using nn::SeqLayout;
using DTensor = nn::TensorT<double>;
using DGraph = nn::GraphT<double>;

namespace {

DTensor randn(std::vector<int> shape, Rng& rng, double s = 1.0) {
  return DTensor::randn(std::move(shape), rng, s);
}

// Scalarize an arbitrary output with fixed weights so every output
// coordinate contributes to the FD probe.
int scalarize(DGraph& g, int out, uint64_t salt) {
  Rng wr(0x5eed0000 + salt);
  return g.weighted_sum(out, randn(g.value(out).shape, wr));
}

using Forward = std::function<int(DGraph&, const std::vector<int>&)>;

void check_op(const char* name, std::vector<DTensor> inputs, const Forward& fwd,
              double tol = 1e-3) {
  auto res = nn::grad_check<double>(inputs, fwd);
  INFO(name, ": worst ", res.worst, " rel_err ", res.max_rel_err);
  CHECK(res.checked > 0);
  CHECK(res.max_rel_err <= tol);
}

}  // namespace

TEST_CASE("fd: elementwise and linear algebra ops") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Rng rng(seed);
    check_op("add", {randn({3, 4}, rng), randn({3, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.add(in[0], in[1]), 1);
             });
    check_op("sub+scale", {randn({3, 4}, rng), randn({3, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.scale(g.sub(in[0], in[1]), 1.7), 2);
             });
    check_op("matmul", {randn({3, 5}, rng), randn({5, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.matmul(in[0], in[1]), 3);
             });
    check_op("matmul_nt", {randn({3, 5}, rng), randn({4, 5}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.matmul_nt(in[0], in[1]), 4);
             });
    check_op("linear", {randn({6, 5}, rng), randn({4, 5}, rng), randn({4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.linear(in[0], in[1], in[2]), 5);
             });
    check_op("transpose", {randn({3, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.transpose(in[0]), 6);
             });
    check_op("slice+concat", {randn({2, 6}, rng), randn({3, 3}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               int a = g.slice_cols(in[0], 1, 3);
               return scalarize(g, g.concat_rows({a, in[1]}), 7);
             });
  }
}

TEST_CASE("fd: activations and norms") {
  for (uint64_t seed : {11ull, 12ull, 13ull, 14ull, 15ull}) {
    Rng rng(seed);
    // keep relu inputs away from the kink at 0
    DTensor rx = randn({4, 5}, rng);
    for (auto& v : rx.data)
      if (std::abs(v) < 0.05) v += 0.1;
    check_op("relu", {rx}, [](DGraph& g, const std::vector<int>& in) {
      return scalarize(g, g.relu(in[0]), 8);
    });
    check_op("gelu", {randn({4, 5}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.gelu(in[0]), 9);
             });
    check_op("layer_norm", {randn({4, 6}, rng), randn({6}, rng), randn({6}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.layer_norm(in[0], in[1], in[2]), 10);
             });
    check_op("l2_normalize", {randn({4, 6}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.l2_normalize_rows(in[0]), 11);
             });
    check_op("softmax_rows", {randn({4, 6}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.softmax_rows(in[0]), 12);
             });
  }
}

TEST_CASE("fd: conv, upsample, time ops") {
  for (uint64_t seed : {21ull, 22ull, 23ull, 24ull, 25ull}) {
    Rng rng(seed);
    check_op("conv1d s1", {randn({3, 9}, rng), randn({5, 3 * 3}, rng), randn({5}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.conv1d(in[0], in[1], in[2], 3, 1, 1), 13);
             });
    check_op("conv1d s2", {randn({2, 8}, rng), randn({4, 2 * 4}, rng), randn({4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.conv1d(in[0], in[1], in[2], 4, 2, 1), 14);
             });
    check_op("upsample", {randn({3, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.upsample_nearest(in[0], 2), 15);
             });
    check_op("diff_cols", {randn({3, 6}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.diff_cols(in[0]), 16);
             });
    check_op("mean_cols", {randn({3, 6}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.mean_cols(in[0]), 17);
             });
  }
}

TEST_CASE("fd: embedding, attention, losses") {
  for (uint64_t seed : {31ull, 32ull, 33ull, 34ull, 35ull}) {
    Rng rng(seed);
    check_op("embedding", {randn({7, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.embedding(in[0], {2, 0, 6, 2, 5}), 18);
             });
    SeqLayout seqs;
    seqs.push(3);
    seqs.push(5);
    check_op("causal_attention",
             {randn({8, 6}, rng), randn({8, 6}, rng), randn({8, 6}, rng)},
             [seqs](DGraph& g, const std::vector<int>& in) {
               return scalarize(g, g.causal_attention(in[0], in[1], in[2], 2, seqs), 19);
             });
    check_op("cross_entropy", {randn({5, 7}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               return g.cross_entropy(in[0], {3, -1, 0, 6, 2});
             });
    {
      Rng tr(seed + 100);
      DTensor target = randn({3, 4}, tr);
      // keep |pred - target| away from the smooth-L1 transition at beta
      DTensor pred = randn({3, 4}, tr);
      for (int64_t i = 0; i < pred.numel(); ++i) {
        double d = pred.data[i] - target.data[i];
        if (std::abs(std::abs(d) - 1.0) < 0.05) pred.data[i] += 0.15;
      }
      check_op("smooth_l1", {pred}, [target](DGraph& g, const std::vector<int>& in) {
        return g.smooth_l1(in[0], target, 1.0);
      });
    }
    check_op("weighted_sum", {randn({3, 4}, rng)},
             [](DGraph& g, const std::vector<int>& in) {
               Rng wr(7);
               return g.weighted_sum(in[0], randn({3, 4}, wr));
             });
  }
}

TEST_CASE("fd: composite pre-LN transformer block") {
  // Full block wired from leaves so the chain rule composes across every op.
  Rng rng(99);
  const int d = 8, heads = 2;
  SeqLayout seqs;
  seqs.push(4);
  seqs.push(2);

  std::vector<DTensor> inputs;
  inputs.push_back(randn({6, d}, rng, 0.7));            // 0: x
  inputs.push_back(DTensor::full({d}, 1.0));            // 1: ln1 gain
  inputs.push_back(randn({d}, rng, 0.1));               // 2: ln1 bias
  inputs.push_back(randn({3 * d, d}, rng, 0.3));        // 3: qkv w
  inputs.push_back(randn({3 * d}, rng, 0.1));           // 4: qkv b
  inputs.push_back(randn({d, d}, rng, 0.3));            // 5: attn proj w
  inputs.push_back(randn({d}, rng, 0.1));               // 6: attn proj b
  inputs.push_back(DTensor::full({d}, 1.0));            // 7: ln2 gain
  inputs.push_back(randn({d}, rng, 0.1));               // 8: ln2 bias
  inputs.push_back(randn({4 * d, d}, rng, 0.3));        // 9: fc w
  inputs.push_back(randn({4 * d}, rng, 0.1));           // 10: fc b
  inputs.push_back(randn({d, 4 * d}, rng, 0.3));        // 11: mlp proj w
  inputs.push_back(randn({d}, rng, 0.1));               // 12: mlp proj b

  auto fwd = [&seqs](DGraph& g, const std::vector<int>& in) {
    const int d = 8, heads = 2;
    int h1 = g.layer_norm(in[0], in[1], in[2]);
    int qkv = g.linear(h1, in[3], in[4]);
    int q = g.slice_cols(qkv, 0, d);
    int k = g.slice_cols(qkv, d, d);
    int v = g.slice_cols(qkv, 2 * d, d);
    int att = g.causal_attention(q, k, v, heads, seqs);
    int x1 = g.add(in[0], g.linear(att, in[5], in[6]));
    int h2 = g.layer_norm(x1, in[7], in[8]);
    int m = g.linear(g.gelu(g.linear(h2, in[9], in[10])), in[11], in[12]);
    return scalarize(g, g.add(x1, m), 20);
  };
  auto res = nn::grad_check<double>(inputs, fwd);
  INFO("block worst ", res.worst, " rel_err ", res.max_rel_err);
  CHECK(res.max_rel_err <= 1e-3);
}

TEST_CASE("hand fixture: conv1d [1,2,3,4] * [1,1] stride 2") {
  DGraph g;
  int x = g.leaf(DTensor({1, 4}, {1, 2, 3, 4}), false);
  int w = g.leaf(DTensor({1, 2}, {1, 1}), false);
  int b = g.leaf(DTensor({1}, {0}), false);
  int y = g.conv1d(x, w, b, 2, 2, 0);
  REQUIRE(g.value(y).cols() == 2);
  CHECK(g.value(y)(0, 0) == doctest::Approx(3.0));
  CHECK(g.value(y)(0, 1) == doctest::Approx(7.0));
}

TEST_CASE("hand fixture: matmul square gradient") {
  // f(w) = (w^T w) summed for scalar w=3 -> f=9, df/dw=6
  DGraph g;
  int w = g.leaf(DTensor({1, 1}, {3.0}), true);
  int f = g.matmul(w, w);
  g.backward(f);
  CHECK(g.grad(w)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("attention: T=1 rows pass v through; uniform q/k gives prefix means") {
  Rng rng(5);
  DGraph g;
  SeqLayout s1;
  s1.push(1);
  DTensor v = randn({1, 4}, rng);
  int q = g.leaf(randn({1, 4}, rng), false);
  int k = g.leaf(randn({1, 4}, rng), false);
  int vv = g.leaf(v, false);
  int out = g.causal_attention(q, k, vv, 2, s1);
  for (int c = 0; c < 4; ++c) CHECK(g.value(out)(0, c) == doctest::Approx(v(0, c)));

  // identical q/k rows -> uniform probs over the causal prefix
  DGraph g2;
  SeqLayout s4;
  s4.push(4);
  DTensor ones = DTensor::full({4, 2}, 1.0);
  DTensor vals({4, 2}, {1, 0, 2, 0, 3, 0, 4, 0});
  int out2 = g2.causal_attention(g2.leaf(ones), g2.leaf(ones), g2.leaf(vals), 1, s4);
  CHECK(g2.value(out2)(0, 0) == doctest::Approx(1.0));
  CHECK(g2.value(out2)(1, 0) == doctest::Approx(1.5));
  CHECK(g2.value(out2)(2, 0) == doctest::Approx(2.0));
  CHECK(g2.value(out2)(3, 0) == doctest::Approx(2.5));
}

TEST_CASE("attention: causality — future perturbation cannot change the past") {
  Rng rng(6);
  DTensor q = randn({5, 4}, rng), k = randn({5, 4}, rng), v = randn({5, 4}, rng);
  SeqLayout s;
  s.push(5);
  auto run = [&](const DTensor& kk, const DTensor& vv) {
    DGraph g;
    int out = g.causal_attention(g.leaf(q), g.leaf(kk), g.leaf(vv), 2, s);
    return g.value(out);
  };
  DTensor base = run(k, v);
  DTensor k2 = k, v2 = v;
  for (int c = 0; c < 4; ++c) {
    k2(4, c) += 10.0;
    v2(4, c) -= 3.0;
  }
  DTensor pert = run(k2, v2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(base(r, c) == pert(r, c));
  // row 4 must differ
  double diff = 0;
  for (int c = 0; c < 4; ++c) diff += std::abs(base(4, c) - pert(4, c));
  CHECK(diff > 1e-6);
}

TEST_CASE("attention: packed sequences are independent") {
  Rng rng(7);
  DTensor q = randn({6, 4}, rng), k = randn({6, 4}, rng), v = randn({6, 4}, rng);
  SeqLayout both;
  both.push(3);
  both.push(3);
  DGraph g;
  int out = g.causal_attention(g.leaf(q), g.leaf(k), g.leaf(v), 2, both);
  // second sequence alone must produce identical rows
  DTensor q2({3, 4}), k2({3, 4}), v2({3, 4});
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      q2(r, c) = q(r + 3, c);
      k2(r, c) = k(r + 3, c);
      v2(r, c) = v(r + 3, c);
    }
  SeqLayout solo;
  solo.push(3);
  DGraph g2;
  int out2 = g2.causal_attention(g2.leaf(q2), g2.leaf(k2), g2.leaf(v2), 2, solo);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(g.value(out)(r + 3, c) == g2.value(out2)(r, c));
}

TEST_CASE("cross_entropy: uniform logits give ln(V); ignored rows drop out") {
  DGraph g;
  int logits = g.leaf(DTensor::zeros({3, 10}), true);
  int loss = g.cross_entropy(logits, {4, -1, 7});
  CHECK(g.value(loss)(0) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  g.backward(loss);
  // ignored row has zero gradient
  for (int c = 0; c < 10; ++c) CHECK(g.grad(logits)(1, c) == 0.0);
}

TEST_CASE("straight_through: value is quantized, gradient is identity") {
  DGraph g;
  int x = g.leaf(DTensor({2, 2}, {0.1, 0.9, -0.4, 2.0}), true);
  DTensor q({2, 2}, {0.0, 1.0, -0.5, 2.0});
  int st = g.straight_through(x, q);
  for (int64_t i = 0; i < 4; ++i) CHECK(g.value(st).data[i] == q.data[i]);
  Rng wr(3);
  DTensor w = randn({2, 2}, wr);
  int loss = g.weighted_sum(st, w);
  g.backward(loss);
  for (int64_t i = 0; i < 4; ++i) CHECK(g.grad(x).data[i] == w.data[i]);
}

TEST_CASE("graph guards: double backward and detached loss throw") {
  DGraph g;
  int x = g.leaf(DTensor({1}, {2.0}), true);
  int y = g.scale(x, 3.0);
  g.backward(y);
  CHECK_THROWS_AS(g.backward(y), ConfigError);

  DGraph g2;
  int c = g2.leaf(DTensor({1}, {1.0}), false);
  CHECK_THROWS_AS(g2.backward(c), ConfigError);

  DGraph g3;
  int m = g3.leaf(DTensor({2, 2}, {1, 2, 3, 4}), true);
  CHECK_THROWS_AS(g3.backward(m), ConfigError);
}

TEST_CASE("adam: first step moves each param by ~lr against gradient sign") {
  nn::ParameterT<double> p("p", DTensor({3}, {1.0, -2.0, 0.5}));
  nn::AdamT<double> opt({&p}, 0.01);
  p.grad = DTensor({3}, {0.4, -0.2, 1000.0});
  opt.step();
  CHECK(p.value(0) == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(p.value(1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
  CHECK(p.value(2) == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(nn::cosine_lr(1.0, 0, 100) == doctest::Approx(1.0));
  CHECK(nn::cosine_lr(1.0, 50, 100) == doctest::Approx(0.5));
  CHECK(nn::cosine_lr(1.0, 100, 100) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nn::cosine_lr(1.0, 200, 100) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("grad clip: norm computed and rescaled") {
  nn::ParameterT<double> p("p", DTensor({2}, {0.0, 0.0}));
  nn::AdamT<double> opt({&p}, 0.1);
  p.grad = DTensor({2}, {3.0, 4.0});
  double norm = opt.clip_grad_norm(1.0);
  CHECK(norm == doctest::Approx(5.0));
  double after = std::hypot(p.grad(0), p.grad(1));
  CHECK(after == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("training loop determinism: identical seeds give identical losses") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    nn::LinearT<float> l1("l1", 4, 8, rng), l2("l2", 8, 2, rng);
    std::vector<nn::ParameterT<float>*> params;
    l1.collect(params);
    l2.collect(params);
    nn::AdamT<float> opt(params, 1e-2);
    Rng drng(seed + 1);
    auto x = nn::TensorT<float>::randn({16, 4}, drng);
    std::vector<int> targets;
    for (int i = 0; i < 16; ++i) targets.push_back(i % 2);
    std::vector<float> losses;
    for (int step = 0; step < 20; ++step) {
      nn::GraphT<float> g;
      int h = g.relu(l1(g, g.leaf(x)));
      int logits = l2(g, h);
      int loss = g.cross_entropy(logits, targets);
      losses.push_back(g.value(loss)(0));
      opt.zero_grad();
      g.backward(loss);
      g.harvest_param_grads();
      opt.step();
    }
    return losses;
  };
  auto a = run(42), b = run(42), c = run(43);
  CHECK(a == b);
  CHECK(a.back() < a.front());  // it actually learns
  CHECK(a != c);
}

TEST_CASE("dropout: p=0 identity; mask scales kept units; grads masked") {
  Rng rng(9);
  DTensor x = randn({20, 10}, rng);
  DGraph g;
  int xi = g.leaf(x, true);
  Rng drop_rng(17);
  int y = g.dropout(xi, 0.5, drop_rng);
  const auto& Y = g.value(y);
  int kept = 0;
  for (int64_t i = 0; i < Y.numel(); ++i) {
    if (Y.data[i] != 0.0) {
      CHECK(Y.data[i] == doctest::Approx(2.0 * x.data[i]));
      ++kept;
    }
  }
  CHECK(kept > 40);
  CHECK(kept < 160);
  DGraph g0;
  int xi0 = g0.leaf(x, true);
  Rng r0(1);
  CHECK(g0.dropout(xi0, 0.0, r0) == xi0);
}
