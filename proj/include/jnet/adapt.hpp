#pragma once

// Discriminative block: soft cluster assignment over K learned centroids,
// soft class-center, discriminative vector, feed-forward recombination, and
// the non-gradient centroid update.

#include <cmath>
#include <random>
#include <vector>

#include "jnet/layers.hpp"
#include "jnet/tensor.hpp"

namespace jnet {

struct ClusterBank {
  Tensor centers;  // K x h, updated only by update_centers (no Adam)
  double alpha = 50.0;
  double beta = 0.01;

  ClusterBank() = default;
  // Centers start as unit-length Gaussian directions.
  ClusterBank(std::size_t k, std::size_t h, double alpha_, double beta_, Rng& rng)
      : alpha(alpha_), beta(beta_) {
    if (k < 1) throw ConfigError("ClusterBank: K must be >= 1");
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(h)));
    std::vector<double> v(k * h);
    for (double& x : v) x = g(rng);
    for (std::size_t i = 0; i < k; ++i) {
      double n = 0.0;
      for (std::size_t j = 0; j < h; ++j) n += v[i * h + j] * v[i * h + j];
      n = std::sqrt(n);
      for (std::size_t j = 0; j < h; ++j) v[i * h + j] /= n;
    }
    centers = Tensor({k, h}, std::move(v));
  }

  std::size_t k() const { return centers.rows(); }
  std::size_t dim() const { return centers.cols(); }
};

struct AdaptOutput {
  Tensor weights;   // w^a over K clusters
  Tensor center;    // soft class-center
  Tensor delta;     // x - center
  Tensor out;       // relu(W [x, center, delta] + b)
};

namespace detail {
inline double row_norm(const Tensor& m, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) s += m.at(i, j) * m.at(i, j);
  return std::sqrt(s);
}
}  // namespace detail

// Adapting step. Gradients flow through x and the feed-forward weights; the
// centers sit on the tape as constants unless center_grads is set.
inline AdaptOutput adapt(Tape& tp, const ClusterBank& bank, const Tensor& x,
                         const FeedForwardParams& ff, bool center_grads = false) {
  if (x.size() != bank.dim())
    throw ShapeError("adapt: input " + shape_str(x.shape()) + " vs centers " +
                     shape_str(bank.centers.shape()));
  const std::size_t k = bank.k();
  Tensor x_norm = tp.sqrt(tp.dot(x, x));
  if (x_norm.item() <= 0.0) throw DomainError("adapt: zero-norm input vector");
  Tensor centers = center_grads
                       ? bank.centers
                       : tp.constant(bank.centers.shape(), bank.centers.values());
  std::vector<Tensor> sims(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double cn = detail::row_norm(bank.centers, i);
    if (cn <= 0.0)
      throw DomainError("adapt: zero-norm cluster center " + std::to_string(i));
    Tensor ci = tp.row(centers, i);
    sims[i] = tp.div(tp.dot(x, ci), tp.scale(x_norm, cn));
  }
  Tensor weights = tp.softmax(tp.stack_scalars(sims), bank.alpha);
  Tensor center = tp.matvec(tp.transpose(centers), weights);
  Tensor delta = tp.sub(x, center);
  Tensor out = feed_forward_relu(tp, ff, tp.concat({x, center, delta}));
  return {weights, center, delta, out};
}

// Updating step: x̄'_k = (1 - beta w_k) x̄_k + beta w_k x. Applied once per
// training example, never during evaluation. Caller serializes access.
inline void update_centers(ClusterBank& bank, const std::vector<double>& x,
                           const std::vector<double>& weights) {
  const std::size_t k = bank.k(), h = bank.dim();
  if (x.size() != h || weights.size() != k)
    throw ShapeError("update_centers: size mismatch");
  auto& c = bank.centers.values();
  for (std::size_t i = 0; i < k; ++i) {
    const double step = bank.beta * weights[i];
    for (std::size_t j = 0; j < h; ++j)
      c[i * h + j] = (1.0 - step) * c[i * h + j] + step * x[j];
  }
}

// TreeLSTM adaptation Q-code: the adapted vector consumed downstream exactly
// like the plain TreeLSTM Q-code.
inline AdaptOutput adapt_qcode(Tape& tp, const ClusterBank& bank, const Tensor& q_tl,
                               const FeedForwardParams& ff, bool center_grads = false) {
  return adapt(tp, bank, q_tl, ff, center_grads);
}

}  // namespace jnet
