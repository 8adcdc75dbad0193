#pragma once

#include <cmath>
#include <vector>

#include "motionlm/nn/graph.hpp"

namespace motionlm::nn {

// Shared trainer knobs; lr 5e-4 with cosine decay to zero.
struct OptimConfig {
  int steps = 3000;
  int batch_size = 32;
  int grad_accum = 1;
  double lr = 5e-4;
  double clip_norm = 1.0;
  uint64_t seed = 0;
  int log_every = 100;
};

// Half-cosine decay from lr0 to 0 over total_steps.
inline double cosine_lr(double lr0, int64_t step, int64_t total_steps) {
  if (total_steps <= 0) return lr0;
  double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return 0.5 * lr0 * (1.0 + std::cos(M_PI * t));
}

template <typename T>
class AdamT {
 public:
  AdamT(std::vector<ParameterT<T>*> params, double lr, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      if (p->adam_m.numel() == 0) p->adam_m = TensorT<T>::zeros(p->value.shape);
      if (p->adam_v.numel() == 0) p->adam_v = TensorT<T>::zeros(p->value.shape);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int64_t steps_done() const { return t_; }

  void zero_grad() {
    for (auto* p : params_)
      std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
  }

  // Global-norm clip; returns the pre-clip norm. max_norm <= 0 disables.
  double clip_grad_norm(double max_norm) {
    double sq = 0;
    for (auto* p : params_)
      for (auto v : p->grad.data) sq += static_cast<double>(v) * v;
    double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
      T s = static_cast<T>(max_norm / (norm + 1e-12));
      for (auto* p : params_)
        for (auto& v : p->grad.data) v *= s;
    }
    return norm;
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto* p : params_) {
      for (int64_t i = 0; i < p->value.numel(); ++i) {
        double g = p->grad.data[i];
        double m = beta1_ * p->adam_m.data[i] + (1.0 - beta1_) * g;
        double v = beta2_ * p->adam_v.data[i] + (1.0 - beta2_) * g * g;
        p->adam_m.data[i] = static_cast<T>(m);
        p->adam_v.data[i] = static_cast<T>(v);
        double mh = m / bc1, vh = v / bc2;
        p->value.data[i] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  const std::vector<ParameterT<T>*>& params() const { return params_; }

 private:
  std::vector<ParameterT<T>*> params_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

using Adam = AdamT<float>;

}  // namespace motionlm::nn
