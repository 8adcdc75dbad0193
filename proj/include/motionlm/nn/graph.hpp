// Tape-based reverse-mode autodiff over a closed op set: conv1d,
// nearest-upsample, linear, relu/gelu, layernorm, embedding, causal
// multi-head attention, cross-entropy, smooth-L1, plus the small glue ops
// the models need. Every op stores a backward closure; backward() walks
// the tape once in reverse creation order.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "motionlm/nn/tensor.hpp"

namespace motionlm::nn {

template <typename T>
struct ParameterT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;
  TensorT<T> adam_m, adam_v;  // lazily sized by the optimizer

  ParameterT() = default;
  ParameterT(std::string n, TensorT<T> v) : name(std::move(n)), value(std::move(v)) {
    grad = TensorT<T>::zeros(value.shape);
  }
};

using Parameter = ParameterT<float>;

// Row ranges of sequences packed into one [M, d] matrix.
struct SeqLayout {
  std::vector<int> offsets;
  std::vector<int> lengths;
  int total = 0;

  void push(int len) {
    offsets.push_back(total);
    lengths.push_back(len);
    total += len;
  }
  int count() const { return static_cast<int>(lengths.size()); }
};

template <typename T>
class GraphT {
 public:
  using Tensor = TensorT<T>;
  using Mat = typename Tensor::Mat;

  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    bool needs_grad = false;
    std::function<void(GraphT&)> backward;  // null for leaves
  };

  GraphT() = default;
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  const Tensor& value(int id) const { return nodes_[id].value; }
  Tensor& grad(int id) { return ensure_grad(id); }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  int leaf(Tensor v, bool requires_grad = false) {
    return push(std::move(v), requires_grad, nullptr);
  }

  int constant(Tensor v) { return leaf(std::move(v), false); }

  // One node per parameter per graph; repeated calls return the cached node.
  int param(ParameterT<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    int id = leaf(p.value, true);
    param_nodes_.emplace(&p, id);
    return id;
  }

  // Adds node grads into the parameters' grad buffers (gradient accumulation).
  void harvest_param_grads() {
    for (auto& [p, id] : param_nodes_) {
      Node& n = nodes_[id];
      if (n.grad.numel() == 0) continue;
      for (int64_t i = 0; i < n.grad.numel(); ++i) p->grad.data[i] += n.grad.data[i];
    }
  }

  // ---- arithmetic ----

  int add(int a, int b) {
    check_same_shape(a, b, "add");
    Tensor out = nodes_[a].value;
    out.mat() += nodes_[b].value.mat();
    return push(std::move(out), any_grad({a, b}), [a, b](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(a)) g.ensure_grad(a).mat() += go.mat();
      if (g.needs_grad(b)) g.ensure_grad(b).mat() += go.mat();
    });
  }

  int sub(int a, int b) {
    check_same_shape(a, b, "sub");
    Tensor out = nodes_[a].value;
    out.mat() -= nodes_[b].value.mat();
    return push(std::move(out), any_grad({a, b}), [a, b](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(a)) g.ensure_grad(a).mat() += go.mat();
      if (g.needs_grad(b)) g.ensure_grad(b).mat() -= go.mat();
    });
  }

  int scale(int a, T s) {
    Tensor out = nodes_[a].value;
    out.mat() *= s;
    return push(std::move(out), any_grad({a}), [a, s](GraphT& g) {
      if (g.needs_grad(a)) g.ensure_grad(a).mat() += s * g.out_grad().mat();
    });
  }

  int matmul(int a, int b) {  // [m,k] x [k,n]
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.cols() != B.rows()) throw ConfigError("matmul: inner dim mismatch");
    Tensor out({A.rows(), B.cols()});
    out.mat().noalias() = A.mat() * B.mat();
    return push(std::move(out), any_grad({a, b}), [a, b](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(a)) g.ensure_grad(a).mat().noalias() += go.mat() * g.value(b).mat().transpose();
      if (g.needs_grad(b)) g.ensure_grad(b).mat().noalias() += g.value(a).mat().transpose() * go.mat();
    });
  }

  int matmul_nt(int a, int b) {  // [m,k] x [n,k]^T -> [m,n]
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.cols() != B.cols()) throw ConfigError("matmul_nt: inner dim mismatch");
    Tensor out({A.rows(), B.rows()});
    out.mat().noalias() = A.mat() * B.mat().transpose();
    return push(std::move(out), any_grad({a, b}), [a, b](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(a)) g.ensure_grad(a).mat().noalias() += go.mat() * g.value(b).mat();
      if (g.needs_grad(b)) g.ensure_grad(b).mat().noalias() += go.mat().transpose() * g.value(a).mat();
    });
  }

  // x[m,in], w[out,in], b[out] -> [m,out]
  int linear(int x, int w, int b) {
    const Tensor& X = nodes_[x].value;
    const Tensor& W = nodes_[w].value;
    const Tensor& B = nodes_[b].value;
    if (X.cols() != W.cols()) throw ConfigError("linear: feature dim mismatch");
    if (B.numel() != W.rows()) throw ConfigError("linear: bias dim mismatch");
    Tensor out({X.rows(), W.rows()});
    out.mat().noalias() = X.mat() * W.mat().transpose();
    out.mat().rowwise() += B.mat(1, B.numel()).row(0);
    return push(std::move(out), any_grad({x, w, b}), [x, w, b](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(x)) g.ensure_grad(x).mat().noalias() += go.mat() * g.value(w).mat();
      if (g.needs_grad(w)) g.ensure_grad(w).mat().noalias() += go.mat().transpose() * g.value(x).mat();
      if (g.needs_grad(b)) {
        Tensor& gb = g.ensure_grad(b);
        gb.mat(1, gb.numel()).row(0) += go.mat().colwise().sum();
      }
    });
  }

  // ---- convolution ----

  // x[Cin,Tin], w[Cout, Cin*k], b[Cout]; zero padding on both ends.
  int conv1d(int x, int w, int b, int kernel, int stride, int pad) {
    const Tensor& X = nodes_[x].value;
    const Tensor& W = nodes_[w].value;
    int c_in = X.rows(), t_in = X.cols();
    if (W.cols() != c_in * kernel) throw ConfigError("conv1d: weight/kernel mismatch");
    if (t_in + 2 * pad < kernel) throw ConfigError("conv1d: input shorter than kernel");
    int t_out = (t_in + 2 * pad - kernel) / stride + 1;

    auto cols = std::make_shared<Tensor>(std::vector<int>{c_in * kernel, t_out});
    for (int j = 0; j < t_out; ++j) {
      int start = j * stride - pad;
      for (int c = 0; c < c_in; ++c)
        for (int u = 0; u < kernel; ++u) {
          int t = start + u;
          (*cols)(c * kernel + u, j) = (t >= 0 && t < t_in) ? X(c, t) : T(0);
        }
    }
    Tensor out({W.rows(), t_out});
    out.mat().noalias() = W.mat() * cols->mat();
    const Tensor& B = nodes_[b].value;
    out.mat().colwise() += B.mat(B.numel(), 1).col(0);

    return push(std::move(out), any_grad({x, w, b}),
                [x, w, b, cols, kernel, stride, pad, c_in, t_in](GraphT& g) {
      const Tensor& go = g.out_grad();
      if (g.needs_grad(w)) g.ensure_grad(w).mat().noalias() += go.mat() * cols->mat().transpose();
      if (g.needs_grad(b)) {
        Tensor& gb = g.ensure_grad(b);
        gb.mat(gb.numel(), 1).col(0) += go.mat().rowwise().sum();
      }
      if (g.needs_grad(x)) {
        Tensor dcols({c_in * kernel, go.cols()});
        dcols.mat().noalias() = g.value(w).mat().transpose() * go.mat();
        Tensor& gx = g.ensure_grad(x);
        for (int j = 0; j < go.cols(); ++j) {
          int start = j * stride - pad;
          for (int c = 0; c < c_in; ++c)
            for (int u = 0; u < kernel; ++u) {
              int t = start + u;
              if (t >= 0 && t < t_in) gx(c, t) += dcols(c * kernel + u, j);
            }
        }
      }
    });
  }

  int upsample_nearest(int x, int factor) {
    const Tensor& X = nodes_[x].value;
    Tensor out({X.rows(), X.cols() * factor});
    for (int c = 0; c < X.rows(); ++c)
      for (int t = 0; t < X.cols(); ++t)
        for (int u = 0; u < factor; ++u) out(c, t * factor + u) = X(c, t);
    return push(std::move(out), any_grad({x}), [x, factor](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      Tensor& gx = g.ensure_grad(x);
      for (int c = 0; c < gx.rows(); ++c)
        for (int t = 0; t < gx.cols(); ++t) {
          T s = 0;
          for (int u = 0; u < factor; ++u) s += go(c, t * factor + u);
          gx(c, t) += s;
        }
    });
  }

  // ---- activations ----

  int relu(int x) {
    Tensor out = nodes_[x].value;
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return push(std::move(out), any_grad({x}), [x, self = size()](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      const Tensor& in = g.value(x);
      Tensor& gx = g.ensure_grad(x);
      for (int64_t i = 0; i < go.numel(); ++i)
        if (in.data[i] > T(0)) gx.data[i] += go.data[i];
      (void)self;
    });
  }

  int gelu(int x) {  // exact erf form
    const Tensor& X = nodes_[x].value;
    Tensor out(X.shape);
    for (int64_t i = 0; i < X.numel(); ++i) {
      double v = static_cast<double>(X.data[i]);
      out.data[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
    }
    return push(std::move(out), any_grad({x}), [x](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      const Tensor& in = g.value(x);
      Tensor& gx = g.ensure_grad(x);
      for (int64_t i = 0; i < go.numel(); ++i) {
        double v = static_cast<double>(in.data[i]);
        double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        gx.data[i] += go.data[i] * static_cast<T>(cdf + v * pdf);
      }
    });
  }

  // Inverted dropout with a seeded mask; p = 0 is the identity.
  int dropout(int x, double p, Rng& rng) {
    if (p <= 0.0) return x;
    const Tensor& X = nodes_[x].value;
    auto mask = std::make_shared<Tensor>(X.shape);
    T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (int64_t i = 0; i < X.numel(); ++i)
      mask->data[i] = rng.bernoulli(1.0 - p) ? keep_scale : T(0);
    Tensor out(X.shape);
    for (int64_t i = 0; i < X.numel(); ++i) out.data[i] = X.data[i] * mask->data[i];
    return push(std::move(out), any_grad({x}), [x, mask](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      Tensor& gx = g.ensure_grad(x);
      for (int64_t i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * mask->data[i];
    });
  }

  // ---- normalization ----

  // Row-wise layer norm over the last dim; gain/bias are [d] vectors.
  int layer_norm(int x, int gain, int bias, double eps = 1e-5) {
    const Tensor& X = nodes_[x].value;
    const Tensor& G = nodes_[gain].value;
    const Tensor& B = nodes_[bias].value;
    int m = X.rows(), d = X.cols();
    if (G.numel() != d || B.numel() != d) throw ConfigError("layer_norm: gain/bias dim mismatch");
    auto xhat = std::make_shared<Tensor>(std::vector<int>{m, d});
    auto rstd = std::make_shared<Tensor>(std::vector<int>{m});
    Tensor out({m, d});
    for (int r = 0; r < m; ++r) {
      double mean = 0, var = 0;
      for (int c = 0; c < d; ++c) mean += X(r, c);
      mean /= d;
      for (int c = 0; c < d; ++c) {
        double u = X(r, c) - mean;
        var += u * u;
      }
      var /= d;
      double rs = 1.0 / std::sqrt(var + eps);
      (*rstd)(r) = static_cast<T>(rs);
      for (int c = 0; c < d; ++c) {
        T h = static_cast<T>((X(r, c) - mean) * rs);
        (*xhat)(r, c) = h;
        out(r, c) = h * G(c) + B(c);
      }
    }
    return push(std::move(out), any_grad({x, gain, bias}), [x, gain, bias, xhat, rstd](GraphT& g) {
      const Tensor& go = g.out_grad();
      int m = go.rows(), d = go.cols();
      if (g.needs_grad(gain)) {
        Tensor& gg = g.ensure_grad(gain);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < d; ++c) gg(c) += go(r, c) * (*xhat)(r, c);
      }
      if (g.needs_grad(bias)) {
        Tensor& gb = g.ensure_grad(bias);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < d; ++c) gb(c) += go(r, c);
      }
      if (g.needs_grad(x)) {
        const Tensor& G = g.value(gain);
        Tensor& gx = g.ensure_grad(x);
        for (int r = 0; r < m; ++r) {
          double sum_dy = 0, sum_dyh = 0;
          for (int c = 0; c < d; ++c) {
            double dy = go(r, c) * G(c);
            sum_dy += dy;
            sum_dyh += dy * (*xhat)(r, c);
          }
          double rs = (*rstd)(r);
          for (int c = 0; c < d; ++c) {
            double dy = go(r, c) * G(c);
            gx(r, c) += static_cast<T>(rs * (dy - sum_dy / d - (*xhat)(r, c) * sum_dyh / d));
          }
        }
      }
    });
  }

  // ---- lookup / shape ----

  int embedding(int table, std::vector<int> ids) {
    const Tensor& W = nodes_[table].value;
    int d = W.cols();
    Tensor out({static_cast<int>(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= W.rows()) throw ConfigError("embedding: id out of range");
      out.mat().row(static_cast<int>(r)) = W.mat().row(ids[r]);
    }
    auto ids_p = std::make_shared<std::vector<int>>(std::move(ids));
    return push(std::move(out), any_grad({table}), [table, ids_p](GraphT& g) {
      if (!g.needs_grad(table)) return;
      const Tensor& go = g.out_grad();
      Tensor& gt = g.ensure_grad(table);
      for (size_t r = 0; r < ids_p->size(); ++r)
        gt.mat().row((*ids_p)[r]) += go.mat().row(static_cast<int>(r));
    });
  }

  int transpose(int x) {
    const Tensor& X = nodes_[x].value;
    Tensor out({X.cols(), X.rows()});
    out.mat() = X.mat().transpose();
    return push(std::move(out), any_grad({x}), [x](GraphT& g) {
      if (g.needs_grad(x)) g.ensure_grad(x).mat() += g.out_grad().mat().transpose();
    });
  }

  int slice_cols(int x, int start, int width) {
    const Tensor& X = nodes_[x].value;
    if (start < 0 || start + width > X.cols()) throw ConfigError("slice_cols: out of range");
    Tensor out({X.rows(), width});
    out.mat() = X.mat().middleCols(start, width);
    return push(std::move(out), any_grad({x}), [x, start, width](GraphT& g) {
      if (g.needs_grad(x))
        g.ensure_grad(x).mat().middleCols(start, width) += g.out_grad().mat();
    });
  }

  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: empty");
    int d = nodes_[parts[0]].value.cols();
    int m = 0;
    for (int p : parts) {
      if (nodes_[p].value.cols() != d) throw ConfigError("concat_rows: col mismatch");
      m += nodes_[p].value.rows();
    }
    Tensor out({m, d});
    int r = 0;
    for (int p : parts) {
      const Tensor& P = nodes_[p].value;
      out.mat().block(r, 0, P.rows(), d) = P.mat();
      r += P.rows();
    }
    bool ng = false;
    for (int p : parts) ng = ng || nodes_[p].needs_grad;
    auto parts_p = std::make_shared<std::vector<int>>(parts);
    return push(std::move(out), ng, [parts_p](GraphT& g) {
      const Tensor& go = g.out_grad();
      int r = 0;
      for (int p : *parts_p) {
        int pr = g.value(p).rows();
        if (g.needs_grad(p)) g.ensure_grad(p).mat() += go.mat().block(r, 0, pr, go.cols());
        r += pr;
      }
    });
  }

  // First differences along time: [C,Tn] -> [C,Tn-1].
  int diff_cols(int x) {
    const Tensor& X = nodes_[x].value;
    if (X.cols() < 2) throw ConfigError("diff_cols: needs at least 2 columns");
    Tensor out({X.rows(), X.cols() - 1});
    for (int c = 0; c < X.rows(); ++c)
      for (int t = 0; t + 1 < X.cols(); ++t) out(c, t) = X(c, t + 1) - X(c, t);
    return push(std::move(out), any_grad({x}), [x](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      Tensor& gx = g.ensure_grad(x);
      for (int c = 0; c < gx.rows(); ++c)
        for (int t = 0; t < go.cols(); ++t) {
          gx(c, t + 1) += go(c, t);
          gx(c, t) -= go(c, t);
        }
    });
  }

  int mean_cols(int x) {  // [C,Tn] -> [1,C]
    const Tensor& X = nodes_[x].value;
    Tensor out({1, X.rows()});
    T inv = static_cast<T>(1.0 / X.cols());
    for (int c = 0; c < X.rows(); ++c) {
      double s = 0;
      for (int t = 0; t < X.cols(); ++t) s += X(c, t);
      out(0, c) = static_cast<T>(s) * inv;
    }
    return push(std::move(out), any_grad({x}), [x](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      Tensor& gx = g.ensure_grad(x);
      T inv = static_cast<T>(1.0 / gx.cols());
      for (int c = 0; c < gx.rows(); ++c)
        for (int t = 0; t < gx.cols(); ++t) gx(c, t) += go(0, c) * inv;
    });
  }

  int l2_normalize_rows(int x, double eps = 1e-8) {
    const Tensor& X = nodes_[x].value;
    int m = X.rows(), d = X.cols();
    auto inv_norm = std::make_shared<Tensor>(std::vector<int>{m});
    Tensor out({m, d});
    for (int r = 0; r < m; ++r) {
      double s = 0;
      for (int c = 0; c < d; ++c) s += static_cast<double>(X(r, c)) * X(r, c);
      double n = 1.0 / std::sqrt(s + eps);
      (*inv_norm)(r) = static_cast<T>(n);
      for (int c = 0; c < d; ++c) out(r, c) = static_cast<T>(X(r, c) * n);
    }
    return push(std::move(out), any_grad({x}), [x, inv_norm, self = size()](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      const Tensor& y = g.value(self);
      Tensor& gx = g.ensure_grad(x);
      for (int r = 0; r < go.rows(); ++r) {
        double dot = 0;
        for (int c = 0; c < go.cols(); ++c) dot += static_cast<double>(go(r, c)) * y(r, c);
        for (int c = 0; c < go.cols(); ++c)
          gx(r, c) += static_cast<T>((go(r, c) - y(r, c) * dot) * (*inv_norm)(r));
      }
    });
  }

  // ---- attention ----

  int softmax_rows(int x) {
    const Tensor& X = nodes_[x].value;
    Tensor out(X.shape);
    for (int r = 0; r < X.rows(); ++r) softmax_row(&X(r, 0), &out(r, 0), X.cols());
    return push(std::move(out), any_grad({x}), [x, self = size()](GraphT& g) {
      if (!g.needs_grad(x)) return;
      const Tensor& go = g.out_grad();
      const Tensor& p = g.value(self);
      Tensor& gx = g.ensure_grad(x);
      for (int r = 0; r < p.rows(); ++r) {
        double dot = 0;
        for (int c = 0; c < p.cols(); ++c) dot += static_cast<double>(go(r, c)) * p(r, c);
        for (int c = 0; c < p.cols(); ++c)
          gx(r, c) += static_cast<T>(p(r, c) * (go(r, c) - dot));
      }
    });
  }

  // Causal scaled-dot-product attention over packed sequences. q/k/v are
  // [M, d]; each sequence attends within itself only, positions <= self.
  int causal_attention(int q, int k, int v, int heads, SeqLayout seqs) {
    const Tensor& Q = nodes_[q].value;
    if (Q.rows() != seqs.total) throw ConfigError("attention: layout/row mismatch");
    int d = Q.cols();
    if (d % heads != 0) throw ConfigError("attention: d_model not divisible by heads");
    int dh = d / heads;
    T scl = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    // probs stored per sequence/head as contiguous len*len row-major blocks
    int64_t pt = 0;
    std::vector<int64_t> pofs(seqs.count());
    for (int s = 0; s < seqs.count(); ++s) {
      pofs[s] = pt;
      pt += static_cast<int64_t>(heads) * seqs.lengths[s] * seqs.lengths[s];
    }
    auto probs = std::make_shared<std::vector<T>>(pt, T(0));
    auto layout = std::make_shared<SeqLayout>(std::move(seqs));
    auto pofs_p = std::make_shared<std::vector<int64_t>>(std::move(pofs));

    const Tensor& K = nodes_[k].value;
    const Tensor& V = nodes_[v].value;
    Tensor out({Q.rows(), d});
    using EM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (int s = 0; s < layout->count(); ++s) {
      int o = layout->offsets[s], len = layout->lengths[s];
      for (int h = 0; h < heads; ++h) {
        auto Qh = Q.mat().block(o, h * dh, len, dh);
        auto Kh = K.mat().block(o, h * dh, len, dh);
        auto Vh = V.mat().block(o, h * dh, len, dh);
        Eigen::Map<EM> P(probs->data() + (*pofs_p)[s] + static_cast<int64_t>(h) * len * len, len, len);
        P.noalias() = Qh * Kh.transpose() * scl;
        for (int i = 0; i < len; ++i) {
          // softmax over the causal prefix; strictly future entries get 0
          softmax_row(P.row(i).data(), P.row(i).data(), i + 1);
          for (int j = i + 1; j < len; ++j) P(i, j) = T(0);
        }
        out.mat().block(o, h * dh, len, dh).noalias() = P * Vh;
      }
    }
    return push(std::move(out), any_grad({q, k, v}),
                [q, k, v, heads, dh, scl, probs, layout, pofs_p](GraphT& g) {
      const Tensor& go = g.out_grad();
      const Tensor& Q = g.value(q);
      const Tensor& K = g.value(k);
      const Tensor& V = g.value(v);
      bool nq = g.needs_grad(q), nk = g.needs_grad(k), nv = g.needs_grad(v);
      Tensor* gq = nq ? &g.ensure_grad(q) : nullptr;
      Tensor* gk = nk ? &g.ensure_grad(k) : nullptr;
      Tensor* gv = nv ? &g.ensure_grad(v) : nullptr;
      using EM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      for (int s = 0; s < layout->count(); ++s) {
        int o = layout->offsets[s], len = layout->lengths[s];
        for (int h = 0; h < heads; ++h) {
          Eigen::Map<const EM> P(probs->data() + (*pofs_p)[s] + static_cast<int64_t>(h) * len * len, len, len);
          auto dOut = go.mat().block(o, h * dh, len, dh);
          auto Vh = V.mat().block(o, h * dh, len, dh);
          EM dP = dOut * Vh.transpose();               // [len,len]
          if (nv) gv->mat().block(o, h * dh, len, dh).noalias() += P.transpose() * dOut;
          // softmax backward per causal row
          EM dS(len, len);
          for (int i = 0; i < len; ++i) {
            double dot = 0;
            for (int j = 0; j <= i; ++j) dot += static_cast<double>(dP(i, j)) * P(i, j);
            for (int j = 0; j <= i; ++j)
              dS(i, j) = static_cast<T>(P(i, j) * (dP(i, j) - dot)) * scl;
            for (int j = i + 1; j < len; ++j) dS(i, j) = T(0);
          }
          auto Qh = Q.mat().block(o, h * dh, len, dh);
          auto Kh = K.mat().block(o, h * dh, len, dh);
          if (nq) gq->mat().block(o, h * dh, len, dh).noalias() += dS * Kh;
          if (nk) gk->mat().block(o, h * dh, len, dh).noalias() += dS.transpose() * Qh;
        }
      }
    });
  }

  // ---- losses ----

  // Mean cross-entropy over rows whose target is >= 0 (-1 = ignore).
  int cross_entropy(int logits, std::vector<int> targets) {
    const Tensor& L = nodes_[logits].value;
    if (static_cast<int>(targets.size()) != L.rows())
      throw ConfigError("cross_entropy: target count mismatch");
    int vsz = L.cols();
    auto probs = std::make_shared<Tensor>(L.shape);
    double loss = 0;
    int64_t counted = 0;
    for (int r = 0; r < L.rows(); ++r) {
      softmax_row(&L(r, 0), &(*probs)(r, 0), vsz);
      int t = targets[r];
      if (t < 0) continue;
      if (t >= vsz) throw ConfigError("cross_entropy: target out of range");
      double p = std::max(static_cast<double>((*probs)(r, t)), 1e-30);
      loss -= std::log(p);
      ++counted;
    }
    if (counted == 0) throw ConfigError("cross_entropy: no targets");
    Tensor out({1});
    out(0) = static_cast<T>(loss / counted);
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    return push(std::move(out), any_grad({logits}), [logits, probs, tg, counted](GraphT& g) {
      if (!g.needs_grad(logits)) return;
      T gscale = g.out_grad()(0) / static_cast<T>(counted);
      Tensor& gl = g.ensure_grad(logits);
      for (int r = 0; r < gl.rows(); ++r) {
        int t = (*tg)[r];
        if (t < 0) continue;
        for (int c = 0; c < gl.cols(); ++c) gl(r, c) += gscale * (*probs)(r, c);
        gl(r, t) -= gscale;
      }
    });
  }

  // Mean smooth-L1 (Huber with transition beta) against a fixed target.
  int smooth_l1(int pred, Tensor target, T beta) {
    const Tensor& P = nodes_[pred].value;
    if (!P.same_shape(target)) throw ConfigError("smooth_l1: shape mismatch");
    double loss = 0;
    for (int64_t i = 0; i < P.numel(); ++i) {
      double u = std::abs(static_cast<double>(P.data[i]) - target.data[i]);
      loss += u < beta ? 0.5 * u * u / beta : u - 0.5 * beta;
    }
    Tensor out({1});
    out(0) = static_cast<T>(loss / P.numel());
    auto tgt = std::make_shared<Tensor>(std::move(target));
    return push(std::move(out), any_grad({pred}), [pred, tgt, beta](GraphT& g) {
      if (!g.needs_grad(pred)) return;
      const Tensor& P = g.value(pred);
      T gscale = g.out_grad()(0) / static_cast<T>(P.numel());
      Tensor& gp = g.ensure_grad(pred);
      for (int64_t i = 0; i < P.numel(); ++i) {
        T u = P.data[i] - tgt->data[i];
        T d = u > beta ? T(1) : (u < -beta ? T(-1) : u / beta);
        gp.data[i] += gscale * d;
      }
    });
  }

  // Scalarizer for tests and composite losses: sum(x * weights).
  int weighted_sum(int x, Tensor weights) {
    const Tensor& X = nodes_[x].value;
    if (!X.same_shape(weights)) throw ConfigError("weighted_sum: shape mismatch");
    double s = 0;
    for (int64_t i = 0; i < X.numel(); ++i) s += static_cast<double>(X.data[i]) * weights.data[i];
    Tensor out({1});
    out(0) = static_cast<T>(s);
    auto w = std::make_shared<Tensor>(std::move(weights));
    return push(std::move(out), any_grad({x}), [x, w](GraphT& g) {
      if (!g.needs_grad(x)) return;
      T go = g.out_grad()(0);
      Tensor& gx = g.ensure_grad(x);
      for (int64_t i = 0; i < gx.numel(); ++i) gx.data[i] += go * w->data[i];
    });
  }

  // Quantization pass-through: value is the quantized tensor, gradient is
  // copied to the encoder output unchanged.
  int straight_through(int x, Tensor quantized) {
    if (!nodes_[x].value.same_shape(quantized)) throw ConfigError("straight_through: shape mismatch");
    return push(std::move(quantized), any_grad({x}), [x](GraphT& g) {
      if (g.needs_grad(x)) g.ensure_grad(x).mat() += g.out_grad().mat();
    });
  }

  // ---- backward ----

  void backward(int loss) {
    if (consumed_) throw ConfigError("backward: graph already consumed; re-run forward");
    if (nodes_[loss].value.numel() != 1) throw ConfigError("backward: loss must be scalar");
    if (!nodes_[loss].needs_grad) throw ConfigError("backward: loss is detached from parameters");
    consumed_ = true;
    ensure_grad(loss)(0) = T(1);
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || !n.backward || n.grad.numel() == 0) continue;
      current_ = id;
      n.backward(*this);
    }
  }

  bool consumed() const { return consumed_; }

 private:
  std::vector<Node> nodes_;
  std::map<ParameterT<T>*, int> param_nodes_;
  bool consumed_ = false;
  int current_ = -1;

  int push(Tensor v, bool needs_grad, std::function<void(GraphT&)> bw) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool any_grad(std::initializer_list<int> ids) const {
    for (int id : ids)
      if (nodes_[id].needs_grad) return true;
    return false;
  }

  Tensor& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  const Tensor& out_grad() const { return nodes_[current_].grad; }

  void check_same_shape(int a, int b, const char* op) const {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
      throw ConfigError(std::string(op) + ": shape mismatch");
  }

  static void softmax_row(const T* in, T* out, int n) {
    T mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      double e = std::exp(static_cast<double>(in[i] - mx));
      out[i] = static_cast<T>(e);
      sum += e;
    }
    T inv = static_cast<T>(1.0 / sum);
    for (int i = 0; i < n; ++i) out[i] *= inv;
  }
};

using Graph = GraphT<float>;

}  // namespace motionlm::nn
