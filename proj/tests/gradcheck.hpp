#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "gmce/tensor.hpp"

namespace gmce::testing {

/// Central-finite-difference gradient oracle, independent of the tape
/// backward pass. `make_loss` must rebuild the scalar loss from the current
/// contents of the leaves; it receives a Graph* for the analytic pass and
/// nullptr for the forward-only probes.
///
/// Returns the worst normalized error max |analytic - fd| / max(1, |a|, |fd|)
/// over every element of every leaf.
inline double max_grad_error(const std::vector<TensorPtr>& leaves,
                             const std::function<TensorPtr(Graph*)>& make_loss,
                             double h = 1e-5) {
  for (const auto& leaf : leaves) leaf->zero_grad();
  Graph g;
  auto loss = make_loss(&g);
  g.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();  // untouched leaves count as zero gradient
    analytic.push_back(leaf->grad);
  }

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = *leaves[li];
    for (std::size_t i = 0; i < leaf.data.size(); ++i) {
      const double saved = leaf.data[i];
      leaf.data[i] = saved + h;
      const double up = make_loss(nullptr)->item();
      leaf.data[i] = saved - h;
      const double down = make_loss(nullptr)->item();
      leaf.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[li][i];
      const double err = std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
      worst = std::max(worst, err);
    }
  }
  for (const auto& leaf : leaves) leaf->zero_grad();
  return worst;
}

/// Random tensor with entries ~ N(0,1), nudged away from zero so kinked
/// activations (relu family) never see a finite-difference probe straddling
/// the kink.
inline TensorPtr random_tensor(std::vector<std::size_t> shape, Rng& rng,
                               bool avoid_kink = false) {
  auto t = Tensor::zeros(std::move(shape));
  for (double& v : t->data) {
    v = rng.normal();
    if (avoid_kink && std::fabs(v) < 0.01) v += v < 0.0 ? -0.02 : 0.02;
  }
  return t;
}

}  // namespace gmce::testing
