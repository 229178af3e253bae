#pragma once

// Central finite-difference gradient checking. The same harness backs the
// unit tests, the acceptance suite, and the `gradcheck` CLI subcommand.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "jnet/tensor.hpp"

namespace jnet {

// Builds the loss twice around each perturbed entry of every watched tensor
// and compares against one analytic backward pass. The error is relative
// with a unit floor so near-zero gradients are compared absolutely.
inline double gradcheck_max_rel_err(std::vector<Tensor> watched,
                                    const std::function<Tensor(Tape&)>& build_loss,
                                    double step = 1e-6) {
  std::vector<std::vector<double>> analytic;
  {
    for (auto& w : watched) w.zero_grad();
    Tape tp;
    Tensor loss = build_loss(tp);
    tp.backward(loss);
    for (auto& w : watched) analytic.push_back(w.grad());
  }
  auto loss_value = [&]() {
    Tape tp(false);
    return build_loss(tp).item();
  };
  double max_err = 0.0;
  for (std::size_t w = 0; w < watched.size(); ++w) {
    auto& vals = watched[w].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + step;
      const double up = loss_value();
      vals[i] = keep - step;
      const double down = loss_value();
      vals[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[w][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace jnet
