// Finite-difference oracle for the autodiff tape. A check perturbs every
// input coordinate with central differences and compares against the
// analytic gradient from one backward pass. Run at double precision:
// h = 1e-4 leaves ~1e-8 truncation error, far below the 1e-3 gate.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "motionlm/nn/graph.hpp"

namespace motionlm::nn {

struct GradCheckResult {
  double max_rel_err = 0;
  int64_t checked = 0;
  std::string worst;  // coordinate of the worst relative error

  bool ok(double tol = 1e-3) const { return checked > 0 && max_rel_err <= tol; }
};

// `forward` rebuilds the graph from fresh leaves of `inputs` and returns the
// scalar loss node id. Gradients are compared coordinate-by-coordinate.
// abs_floor: FD evaluation noise is ~eps*|f|/h (~1e-11 here), so differences
// below the floor are unresolvable — e.g. exactly-zero gradients such as a
// key bias under shift-invariant softmax — and count as agreement.
template <typename T>
GradCheckResult grad_check(
    std::vector<TensorT<T>>& inputs,
    const std::function<int(GraphT<T>&, const std::vector<int>&)>& forward,
    double h = 1e-4, double denom_eps = 1e-8, double abs_floor = 1e-8) {
  std::vector<TensorT<T>> analytic;
  {
    GraphT<T> g;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (auto& in : inputs) ids.push_back(g.leaf(in, true));
    int loss = forward(g, ids);
    g.backward(loss);
    for (int id : ids) {
      if (g.grad(id).numel() == 0) g.grad(id) = TensorT<T>::zeros(g.value(id).shape);
      analytic.push_back(g.grad(id));
    }
  }

  auto eval = [&]() -> double {
    GraphT<T> g;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (auto& in : inputs) ids.push_back(g.leaf(in, true));
    int loss = forward(g, ids);
    return static_cast<double>(g.value(loss)(0));
  };

  GradCheckResult res;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int64_t j = 0; j < inputs[i].numel(); ++j) {
      T saved = inputs[i].data[j];
      auto at = [&](double d) {
        inputs[i].data[j] = saved + static_cast<T>(d);
        return eval();
      };
      // five-point stencil: O(h^4) truncation keeps tiny gradients resolvable
      double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      inputs[i].data[j] = saved;
      double an = analytic[i].data[j];
      double abs_err = std::abs(fd - an);
      double rel = abs_err <= abs_floor ? 0.0 : abs_err / (std::abs(fd) + std::abs(an) + denom_eps);
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "input[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      }
    }
  }
  return res;
}

}  // namespace motionlm::nn
