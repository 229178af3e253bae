#pragma once

// Dense double-precision tensors with reverse-mode automatic differentiation.
// A Tape records every operation in creation order; replaying the records in
// reverse is a valid topological order, so backward() is a single reverse
// sweep. Gradients accumulate (+=) so shared subexpressions are handled
// correctly. Tensors without a tape are constants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jnet/errors.hpp"

namespace jnet {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

struct TensorData {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // empty until touched by backward

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
  bool has_grad() const { return grad.size() == val.size(); }
};

using DataPtr = std::shared_ptr<TensorData>;

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values) {
    if (numel(shape) != values.size())
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(shape));
    d_ = std::make_shared<TensorData>();
    d_->shape = std::move(shape);
    d_->val = std::move(values);
  }

  static Tensor zeros(Shape shape) {
    std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t size() const { return d_->val.size(); }
  std::size_t rows() const { return d_->shape.at(0); }
  std::size_t cols() const { return d_->shape.at(1); }

  std::vector<double>& values() { return d_->val; }
  const std::vector<double>& values() const { return d_->val; }
  double operator[](std::size_t i) const { return d_->val[i]; }
  double& operator[](std::size_t i) { return d_->val[i]; }
  double at(std::size_t r, std::size_t c) const {
    return d_->val[r * cols() + c];
  }
  double item() const {
    if (size() != 1) throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
    return d_->val[0];
  }

  const std::vector<double>& grad() const {
    d_->ensure_grad();
    return d_->grad;
  }
  std::vector<double>& grad_mut() {
    d_->ensure_grad();
    return d_->grad;
  }
  void zero_grad() {
    if (d_->has_grad()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
  }

  DataPtr data() const { return d_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(DataPtr d, Tape* t) : d_(std::move(d)), tape_(t) {}

  DataPtr d_;
  Tape* tape_ = nullptr;
};

enum class EwOp { Add, Sub, Mul, Sigmoid, Tanh, Relu, Exp, Log, Sqrt };

// Single-threaded recorder of operations. One tape per forward/backward pass;
// frozen tensors may be shared across tapes and threads.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t num_ops() const { return ops_.size(); }

  void backward(const Tensor& loss) {
    if (loss.size() != 1)
      throw UsageError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.data()->ensure_grad();
    loss.data()->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void zero_grads() {
    for (auto& d : touched_)
      if (d->has_grad()) std::fill(d->grad.begin(), d->grad.end(), 0.0);
  }

  // ---- operations ----

  Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.cols() != b.rows())
      throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make({m, n});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out.values().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
      }
    push({a.data(), b.data()}, out.data(), [m, k, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& A = *in[0];
      auto& B = *in[1];
      A.ensure_grad();
      B.ensure_grad();
      // dA = dC * B^T ; dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = o.grad[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            A.grad[i * k + p] += g * B.val[p * n + j];
            B.grad[p * n + j] += g * A.val[i * k + p];
          }
        }
    });
    return out;
  }

  Tensor matvec(const Tensor& w, const Tensor& x) {
    require_rank(w, 2, "matvec matrix");
    require_rank(x, 1, "matvec vector");
    if (w.cols() != x.size())
      throw ShapeError("matvec: " + shape_str(w.shape()) + " vs " + shape_str(x.shape()));
    const std::size_t m = w.rows(), n = w.cols();
    Tensor out = make({m});
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w.at(i, j) * x[j];
      out[i] = s;
    }
    push({w.data(), x.data()}, out.data(), [m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& W = *in[0];
      auto& X = *in[1];
      W.ensure_grad();
      X.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double g = o.grad[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          W.grad[i * n + j] += g * X.val[j];
          X.grad[j] += g * W.val[i * n + j];
        }
      }
    });
    return out;
  }

  Tensor add(const Tensor& a, const Tensor& b) { return binary(EwOp::Add, a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) { return binary(EwOp::Sub, a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) { return binary(EwOp::Mul, a, b); }
  Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    Tensor out = make(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
    push({a.data(), b.data()}, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
      auto& A = *in[0];
      auto& B = *in[1];
      A.ensure_grad();
      B.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i) {
        A.grad[i] += o.grad[i] / B.val[i];
        B.grad[i] -= o.grad[i] * A.val[i] / (B.val[i] * B.val[i]);
      }
    });
    return out;
  }

  Tensor sigmoid(const Tensor& x) { return unary(EwOp::Sigmoid, x); }
  Tensor tanh(const Tensor& x) { return unary(EwOp::Tanh, x); }
  Tensor relu(const Tensor& x) { return unary(EwOp::Relu, x); }
  Tensor exp(const Tensor& x) { return unary(EwOp::Exp, x); }
  Tensor log(const Tensor& x) { return unary(EwOp::Log, x); }
  Tensor sqrt(const Tensor& x) { return unary(EwOp::Sqrt, x); }

  Tensor scale(const Tensor& x, double c) {
    Tensor out = make(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
    push({x.data()}, out.data(), [c](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i) X.grad[i] += c * o.grad[i];
    });
    return out;
  }

  Tensor clamp_min(const Tensor& x, double floor) {
    Tensor out = make(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], floor);
    push({x.data()}, out.data(), [floor](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i)
        if (X.val[i] > floor) X.grad[i] += o.grad[i];
    });
    return out;
  }

  // Temperature softmax with max-subtraction. axis applies to rank-2 tensors:
  // 1 = along each row, 0 = along each column. Rank-1 tensors ignore axis.
  Tensor softmax(const Tensor& x, double alpha = 1.0, int axis = 1) {
    if (alpha <= 0.0) throw DomainError("softmax: temperature must be positive");
    if (x.size() == 0) throw DomainError("softmax: empty input");
    if (x.shape().size() == 1) return softmax_rows(x, alpha, 1, x.size());
    require_rank(x, 2, "softmax");
    if (axis == 1) return softmax_rows(x, alpha, x.rows(), x.cols());
    if (axis == 0) return transpose(softmax_rows(transpose(x), alpha, x.cols(), x.rows()));
    throw UsageError("softmax: bad axis");
  }

  Tensor transpose(const Tensor& x) {
    require_rank(x, 2, "transpose");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out = make({n, m});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    push({x.data()}, out.data(), [m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) X.grad[i * n + j] += o.grad[j * m + i];
    });
    return out;
  }

  Tensor concat(const std::vector<Tensor>& parts, int axis = 0) {
    if (parts.empty()) throw UsageError("concat: no inputs");
    const std::size_t rank = parts[0].shape().size();
    if (rank == 1 || axis == 0) {
      // rank-1 chaining, or rank-2 row stacking
      std::size_t total = 0;
      for (const auto& p : parts) {
        if (p.shape().size() != rank)
          throw ShapeError("concat: rank mismatch");
        if (rank == 2 && p.cols() != parts[0].cols())
          throw ShapeError("concat axis 0: column mismatch, " + shape_str(p.shape()) +
                           " vs " + shape_str(parts[0].shape()));
        total += p.shape()[0];
      }
      Shape os = parts[0].shape();
      os[0] = total;
      Tensor out = make(os);
      std::size_t off = 0;
      for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.values().begin() + off);
        off += p.size();
      }
      std::vector<DataPtr> in;
      for (const auto& p : parts) in.push_back(p.data());
      push(in, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
        std::size_t off = 0;
        for (auto& p : in) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->val.size(); ++i) p->grad[i] += o.grad[off + i];
          off += p->val.size();
        }
      });
      return out;
    }
    if (rank == 2 && axis == 1) {
      const std::size_t m = parts[0].rows();
      std::size_t total = 0;
      std::vector<std::size_t> widths;
      for (const auto& p : parts) {
        require_rank(p, 2, "concat axis 1");
        if (p.rows() != m)
          throw ShapeError("concat axis 1: row mismatch, " + shape_str(p.shape()) +
                           " vs " + shape_str(parts[0].shape()));
        widths.push_back(p.cols());
        total += p.cols();
      }
      Tensor out = make({m, total});
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& p = parts[pi];
        for (std::size_t r = 0; r < m; ++r)
          std::copy(p.values().begin() + r * widths[pi],
                    p.values().begin() + (r + 1) * widths[pi],
                    out.values().begin() + r * total + off);
        off += widths[pi];
      }
      std::vector<DataPtr> in;
      for (const auto& p : parts) in.push_back(p.data());
      push(in, out.data(), [m, total, widths](const std::vector<DataPtr>& in, TensorData& o) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < in.size(); ++pi) {
          auto& p = *in[pi];
          p.ensure_grad();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < widths[pi]; ++c)
              p.grad[r * widths[pi] + c] += o.grad[r * total + off + c];
          off += widths[pi];
        }
      });
      return out;
    }
    throw UsageError("concat: unsupported rank/axis");
  }

  Tensor sum(const Tensor& x) {
    Tensor out = make({1});
    out[0] = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    push({x.data()}, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (double& g : X.grad) g += o.grad[0];
    });
    return out;
  }

  Tensor row(const Tensor& x, std::size_t i) {
    require_rank(x, 2, "row");
    if (i >= x.rows()) throw UsageError("row: index out of range");
    const std::size_t n = x.cols();
    Tensor out = make({n});
    std::copy(x.values().begin() + i * n, x.values().begin() + (i + 1) * n,
              out.values().begin());
    push({x.data()}, out.data(), [i, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t j = 0; j < n; ++j) X.grad[i * n + j] += o.grad[j];
    });
    return out;
  }

  Tensor pick(const Tensor& x, std::size_t i) {
    if (i >= x.size()) throw UsageError("pick: index out of range");
    Tensor out = make({1});
    out[0] = x[i];
    push({x.data()}, out.data(), [i](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      X.grad[i] += o.grad[0];
    });
    return out;
  }

  Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw UsageError("stack_rows: no inputs");
    const std::size_t n = rows[0].size();
    for (const auto& r : rows) {
      require_rank(r, 1, "stack_rows");
      if (r.size() != n) throw ShapeError("stack_rows: width mismatch");
    }
    Tensor out = make({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(rows[i].values().begin(), rows[i].values().end(),
                out.values().begin() + i * n);
    std::vector<DataPtr> in;
    for (const auto& r : rows) in.push_back(r.data());
    push(in, out.data(), [n](const std::vector<DataPtr>& in, TensorData& o) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        auto& R = *in[i];
        R.ensure_grad();
        for (std::size_t j = 0; j < n; ++j) R.grad[j] += o.grad[i * n + j];
      }
    });
    return out;
  }

  Tensor stack_scalars(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw UsageError("stack_scalars: no inputs");
    Tensor out = make({xs.size()});
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i].item();
    std::vector<DataPtr> in;
    for (const auto& x : xs) in.push_back(x.data());
    push(in, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        in[i]->ensure_grad();
        in[i]->grad[0] += o.grad[i];
      }
    });
    return out;
  }

  Tensor broadcast(const Tensor& s, std::size_t n) {
    if (s.size() != 1) throw UsageError("broadcast: input must be scalar");
    Tensor out = make({n});
    std::fill(out.values().begin(), out.values().end(), s[0]);
    push({s.data()}, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
      auto& S = *in[0];
      S.ensure_grad();
      S.grad[0] += std::accumulate(o.grad.begin(), o.grad.end(), 0.0);
    });
    return out;
  }

  Tensor tile_row(const Tensor& v, std::size_t m) {
    require_rank(v, 1, "tile_row");
    const std::size_t n = v.size();
    Tensor out = make({m, n});
    for (std::size_t i = 0; i < m; ++i)
      std::copy(v.values().begin(), v.values().end(), out.values().begin() + i * n);
    push({v.data()}, out.data(), [m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& V = *in[0];
      V.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) V.grad[j] += o.grad[i * n + j];
    });
    return out;
  }

  // Each row j of x scaled by w[j].
  Tensor scale_rows(const Tensor& x, const Tensor& w) {
    require_rank(x, 2, "scale_rows matrix");
    require_rank(w, 1, "scale_rows weights");
    if (x.rows() != w.size())
      throw ShapeError("scale_rows: " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out = make({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] * w[i];
    push({x.data(), w.data()}, out.data(), [m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      auto& W = *in[1];
      X.ensure_grad();
      W.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          X.grad[i * n + j] += o.grad[i * n + j] * W.val[i];
          W.grad[i] += o.grad[i * n + j] * X.val[i * n + j];
        }
    });
    return out;
  }

  // Per-column max over rows; ties route the gradient to the first maximal row.
  Tensor max_over_rows(const Tensor& x) {
    require_rank(x, 2, "max_over_rows");
    const std::size_t m = x.rows(), n = x.cols();
    if (m == 0) throw DomainError("max_over_rows: empty input");
    Tensor out = make({n});
    auto argmax = std::make_shared<std::vector<std::size_t>>(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      double best = x[j];
      for (std::size_t i = 1; i < m; ++i)
        if (x[i * n + j] > best) {
          best = x[i * n + j];
          (*argmax)[j] = i;
        }
      out[j] = best;
    }
    push({x.data()}, out.data(), [n, argmax](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t j = 0; j < n; ++j) X.grad[(*argmax)[j] * n + j] += o.grad[j];
    });
    return out;
  }

  Tensor mean_over_rows(const Tensor& x) {
    require_rank(x, 2, "mean_over_rows");
    const std::size_t m = x.rows(), n = x.cols();
    if (m == 0) throw DomainError("mean_over_rows: empty input");
    Tensor out = make({n});
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += x[i * n + j];
      out[j] = s / static_cast<double>(m);
    }
    push({x.data()}, out.data(), [m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) X.grad[i * n + j] += inv * o.grad[j];
    });
    return out;
  }

  Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
      throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
    Tensor out = make(shape);
    out.values() = x.values();
    push({x.data()}, out.data(), [](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i) X.grad[i] += o.grad[i];
    });
    return out;
  }

  // x / sum(x); caller guarantees the sum is bounded away from zero.
  Tensor normalize_sum(const Tensor& x) {
    return div(x, broadcast(sum(x), x.size()));
  }

  Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

  Tensor constant(Shape shape, std::vector<double> v) {
    Tensor t(std::move(shape), std::move(v));
    return t;
  }

  // Adopt an external tensor (e.g. a parameter) onto this tape so its
  // gradients participate in backward. The data buffer is shared.
  Tensor use(const Tensor& t) { return Tensor(t.data(), this); }

 private:
  Tensor make(Shape shape) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->val.assign(numel(d->shape), 0.0);
    return Tensor(d, this);
  }

  static void require_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.shape().size() != r)
      throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) +
                       ", got " + shape_str(t.shape()));
  }
  static void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
      throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
  }

  void push(std::vector<DataPtr> inputs, DataPtr output,
            std::function<void(const std::vector<DataPtr>&, TensorData&)> bw) {
    if (!record_) return;
    for (auto& in : inputs) touched_.push_back(in);
    touched_.push_back(output);
    ops_.push_back([inputs = std::move(inputs), output = std::move(output),
                    bw = std::move(bw)]() {
      if (!output->has_grad()) return;  // not an ancestor of the loss
      bw(inputs, *output);
    });
  }

  Tensor unary(EwOp op, const Tensor& x) {
    Tensor out = make(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply1(op, x[i]);
    push({x.data()}, out.data(), [op](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i)
        X.grad[i] += o.grad[i] * d_apply1(op, X.val[i], o.val[i]);
    });
    return out;
  }

  Tensor binary(EwOp op, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elementwise");
    Tensor out = make(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (op) {
        case EwOp::Add: out[i] = a[i] + b[i]; break;
        case EwOp::Sub: out[i] = a[i] - b[i]; break;
        case EwOp::Mul: out[i] = a[i] * b[i]; break;
        default: throw UsageError("binary: bad op");
      }
    }
    push({a.data(), b.data()}, out.data(), [op](const std::vector<DataPtr>& in, TensorData& o) {
      auto& A = *in[0];
      auto& B = *in[1];
      A.ensure_grad();
      B.ensure_grad();
      for (std::size_t i = 0; i < o.val.size(); ++i) {
        switch (op) {
          case EwOp::Add:
            A.grad[i] += o.grad[i];
            B.grad[i] += o.grad[i];
            break;
          case EwOp::Sub:
            A.grad[i] += o.grad[i];
            B.grad[i] -= o.grad[i];
            break;
          case EwOp::Mul:
            A.grad[i] += o.grad[i] * B.val[i];
            B.grad[i] += o.grad[i] * A.val[i];
            break;
          default: break;
        }
      }
    });
    return out;
  }

  static double apply1(EwOp op, double x) {
    switch (op) {
      case EwOp::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
      case EwOp::Tanh: return std::tanh(x);
      case EwOp::Relu: return x > 0.0 ? x : 0.0;
      case EwOp::Exp: return std::exp(x);
      case EwOp::Log: return std::log(x);
      case EwOp::Sqrt: return std::sqrt(x);
      default: throw UsageError("apply1: bad op");
    }
  }
  // relu'(0) := 0
  static double d_apply1(EwOp op, double x, double y) {
    switch (op) {
      case EwOp::Sigmoid: return y * (1.0 - y);
      case EwOp::Tanh: return 1.0 - y * y;
      case EwOp::Relu: return x > 0.0 ? 1.0 : 0.0;
      case EwOp::Exp: return y;
      case EwOp::Log: return 1.0 / x;
      case EwOp::Sqrt: return 0.5 / y;
      default: throw UsageError("d_apply1: bad op");
    }
  }

  Tensor softmax_rows(const Tensor& x, double alpha, std::size_t m, std::size_t n) {
    if (n == 0) throw DomainError("softmax: empty axis");
    Tensor out = make(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
      double mx = x[i * n];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[i * n + j]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] = std::exp(alpha * (x[i * n + j] - mx));
        z += out[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    push({x.data()}, out.data(), [alpha, m, n](const std::vector<DataPtr>& in, TensorData& o) {
      auto& X = *in[0];
      X.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        double gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) gy += o.grad[i * n + j] * o.val[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          X.grad[i * n + j] += alpha * o.val[i * n + j] * (o.grad[i * n + j] - gy);
      }
    });
    return out;
  }

  bool record_;
  std::vector<std::function<void()>> ops_;
  std::vector<DataPtr> touched_;
};

}  // namespace jnet
