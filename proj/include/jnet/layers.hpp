#pragma once

// Parameterized layers: GRU cell, BiGRU encoder, binary TreeLSTM node,
// character CNN, feed-forward, inverted dropout.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "jnet/tensor.hpp"

namespace jnet {

using Rng = std::mt19937_64;

// Named handles on a model's trainable tensors, in declared order.
struct ParamRef {
  std::string name;
  Tensor tensor;
};

inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = u(rng);
  return Tensor({rows, cols}, std::move(v));
}

inline Tensor gaussian_vector(std::size_t n, double sigma, Rng& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return Tensor({n}, std::move(v));
}

// ---------------------------------------------------------------------------
// GRU

struct GruParams {
  Tensor Wr, Ur, br;  // reset gate
  Tensor Wz, Uz, bz;  // update gate
  Tensor Wh, Uh, bh;  // candidate
  std::size_t input_size = 0, hidden_size = 0;

  GruParams() = default;
  GruParams(std::size_t in, std::size_t hid, Rng& rng) : input_size(in), hidden_size(hid) {
    Wr = glorot_uniform(hid, in, rng);
    Ur = glorot_uniform(hid, hid, rng);
    br = Tensor::zeros({hid});
    Wz = glorot_uniform(hid, in, rng);
    Uz = glorot_uniform(hid, hid, rng);
    bz = Tensor::zeros({hid});
    Wh = glorot_uniform(hid, in, rng);
    Uh = glorot_uniform(hid, hid, rng);
    bh = Tensor::zeros({hid});
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".Wr", Wr});
    out.push_back({prefix + ".Ur", Ur});
    out.push_back({prefix + ".br", br});
    out.push_back({prefix + ".Wz", Wz});
    out.push_back({prefix + ".Uz", Uz});
    out.push_back({prefix + ".bz", bz});
    out.push_back({prefix + ".Wh", Wh});
    out.push_back({prefix + ".Uh", Uh});
    out.push_back({prefix + ".bh", bh});
  }
};

// r = sigma(Wr x + Ur h + br); z = sigma(Wz x + Uz h + bz)
// h~ = tanh(Wh x + Uh (r o h) + bh); h' = (1 - z) o h + z o h~
inline Tensor gru_step(Tape& tp, const GruParams& p, const Tensor& x, const Tensor& h_prev) {
  Tensor r = tp.sigmoid(tp.add(tp.add(tp.matvec(p.Wr, x), tp.matvec(p.Ur, h_prev)), p.br));
  Tensor z = tp.sigmoid(tp.add(tp.add(tp.matvec(p.Wz, x), tp.matvec(p.Uz, h_prev)), p.bz));
  Tensor cand = tp.tanh(
      tp.add(tp.add(tp.matvec(p.Wh, x), tp.matvec(p.Uh, tp.mul(r, h_prev))), p.bh));
  Tensor ones = tp.constant({p.hidden_size}, std::vector<double>(p.hidden_size, 1.0));
  return tp.add(tp.mul(tp.sub(ones, z), h_prev), tp.mul(z, cand));
}

// Rows of seq are time steps; output row t is [fwd state at t ; bwd state at t].
inline Tensor bigru_encode(Tape& tp, const GruParams& fwd, const GruParams& bwd,
                           const Tensor& seq) {
  if (seq.shape().size() != 2 || seq.rows() == 0)
    throw DomainError("bigru_encode: sequence must be a non-empty TxD matrix");
  const std::size_t T = seq.rows();
  std::vector<Tensor> fstates(T), bstates(T);
  Tensor h = Tensor::zeros({fwd.hidden_size});
  for (std::size_t t = 0; t < T; ++t) {
    h = gru_step(tp, fwd, tp.row(seq, t), h);
    fstates[t] = h;
  }
  h = Tensor::zeros({bwd.hidden_size});
  for (std::size_t t = T; t-- > 0;) {
    h = gru_step(tp, bwd, tp.row(seq, t), h);
    bstates[t] = h;
  }
  std::vector<Tensor> rows(T);
  for (std::size_t t = 0; t < T; ++t) rows[t] = tp.concat({fstates[t], bstates[t]});
  return tp.stack_rows(rows);
}

// ---------------------------------------------------------------------------
// Binary TreeLSTM

struct TreeLstmParams {
  Tensor Wo, Wf, Wi, Wc;
  Tensor Uo_L, Uo_R;
  Tensor Uf_LL, Uf_LR, Uf_RL, Uf_RR;
  Tensor Ui_L, Ui_R;
  Tensor Uc_L, Uc_R;
  Tensor bo, bf, bi, bc;
  std::size_t input_size = 0, hidden_size = 0;

  TreeLstmParams() = default;
  TreeLstmParams(std::size_t in, std::size_t hid, Rng& rng)
      : input_size(in), hidden_size(hid) {
    Wo = glorot_uniform(hid, in, rng);
    Wf = glorot_uniform(hid, in, rng);
    Wi = glorot_uniform(hid, in, rng);
    Wc = glorot_uniform(hid, in, rng);
    Uo_L = glorot_uniform(hid, hid, rng);
    Uo_R = glorot_uniform(hid, hid, rng);
    Uf_LL = glorot_uniform(hid, hid, rng);
    Uf_LR = glorot_uniform(hid, hid, rng);
    Uf_RL = glorot_uniform(hid, hid, rng);
    Uf_RR = glorot_uniform(hid, hid, rng);
    Ui_L = glorot_uniform(hid, hid, rng);
    Ui_R = glorot_uniform(hid, hid, rng);
    Uc_L = glorot_uniform(hid, hid, rng);
    Uc_R = glorot_uniform(hid, hid, rng);
    bo = Tensor::zeros({hid});
    bf = Tensor::zeros({hid});
    bi = Tensor::zeros({hid});
    bc = Tensor::zeros({hid});
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".Wo", Wo});
    out.push_back({prefix + ".Wf", Wf});
    out.push_back({prefix + ".Wi", Wi});
    out.push_back({prefix + ".Wc", Wc});
    out.push_back({prefix + ".Uo_L", Uo_L});
    out.push_back({prefix + ".Uo_R", Uo_R});
    out.push_back({prefix + ".Uf_LL", Uf_LL});
    out.push_back({prefix + ".Uf_LR", Uf_LR});
    out.push_back({prefix + ".Uf_RL", Uf_RL});
    out.push_back({prefix + ".Uf_RR", Uf_RR});
    out.push_back({prefix + ".Ui_L", Ui_L});
    out.push_back({prefix + ".Ui_R", Ui_R});
    out.push_back({prefix + ".Uc_L", Uc_L});
    out.push_back({prefix + ".Uc_R", Uc_R});
    out.push_back({prefix + ".bo", bo});
    out.push_back({prefix + ".bf", bf});
    out.push_back({prefix + ".bi", bi});
    out.push_back({prefix + ".bc", bc});
  }
};

struct TreeLstmState {
  Tensor h, c;
};

// o,i = sigma(W x + U^L h^L + U^R h^R); f^L and f^R share Wf but use distinct
// U matrices; c = f^L o c^L + f^R o c^R + i o u; h = o o tanh(c).
inline TreeLstmState treelstm_node(Tape& tp, const TreeLstmParams& p, const Tensor& x,
                                   const Tensor& hL, const Tensor& cL, const Tensor& hR,
                                   const Tensor& cR) {
  auto gate = [&](const Tensor& W, const Tensor& UL, const Tensor& UR, const Tensor& b) {
    return tp.add(tp.add(tp.add(tp.matvec(W, x), tp.matvec(UL, hL)), tp.matvec(UR, hR)), b);
  };
  Tensor o = tp.sigmoid(gate(p.Wo, p.Uo_L, p.Uo_R, p.bo));
  Tensor fL = tp.sigmoid(gate(p.Wf, p.Uf_LL, p.Uf_LR, p.bf));
  Tensor fR = tp.sigmoid(gate(p.Wf, p.Uf_RL, p.Uf_RR, p.bf));
  Tensor i = tp.sigmoid(gate(p.Wi, p.Ui_L, p.Ui_R, p.bi));
  Tensor u = tp.tanh(gate(p.Wc, p.Uc_L, p.Uc_R, p.bc));
  Tensor c = tp.add(tp.add(tp.mul(fL, cL), tp.mul(fR, cR)), tp.mul(i, u));
  Tensor h = tp.mul(o, tp.tanh(c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// Character CNN

constexpr std::size_t kCharVocab = 129;  // bytes 0..127 plus UNK at 0

inline std::size_t char_id(unsigned char c) { return c < 128 ? c + 1 : 0; }

struct CharCnnParams {
  Tensor embedding;  // vocab x d_char
  std::vector<std::size_t> widths{1, 3, 5};
  std::vector<Tensor> filters;  // per width: channels x (width * d_char)
  std::vector<Tensor> biases;   // per width: channels
  std::size_t d_char = 0, channels = 0;

  CharCnnParams() = default;
  CharCnnParams(std::size_t dchar, std::size_t ch, Rng& rng) : d_char(dchar), channels(ch) {
    embedding = glorot_uniform(kCharVocab, dchar, rng);
    for (std::size_t w : widths) {
      filters.push_back(glorot_uniform(ch, w * dchar, rng));
      biases.push_back(Tensor::zeros({ch}));
    }
  }

  std::size_t output_size() const { return widths.size() * channels; }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".embedding", embedding});
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out.push_back({prefix + ".filter" + std::to_string(widths[i]), filters[i]});
      out.push_back({prefix + ".bias" + std::to_string(widths[i]), biases[i]});
    }
  }
};

// Valid 1-D convolution per filter bank, relu, max-pool over time; outputs of
// all banks concatenated. Words shorter than a filter width are zero-padded.
inline Tensor charcnn_embed(Tape& tp, const CharCnnParams& p,
                            const std::vector<std::size_t>& char_ids) {
  if (char_ids.empty()) throw DomainError("charcnn_embed: empty word");
  std::vector<Tensor> rows;
  for (std::size_t id : char_ids) rows.push_back(tp.row(p.embedding, id));
  std::vector<Tensor> bank_outputs;
  for (std::size_t b = 0; b < p.widths.size(); ++b) {
    const std::size_t w = p.widths[b];
    std::vector<Tensor> padded = rows;
    while (padded.size() < w) padded.push_back(Tensor::zeros({p.d_char}));
    const std::size_t T = padded.size() - w + 1;
    std::vector<Tensor> conv_rows;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<Tensor> window(padded.begin() + t, padded.begin() + t + w);
      Tensor win = tp.concat(window);
      conv_rows.push_back(tp.relu(tp.add(tp.matvec(p.filters[b], win), p.biases[b])));
    }
    bank_outputs.push_back(tp.max_over_rows(tp.stack_rows(conv_rows)));
  }
  return tp.concat(bank_outputs);
}

// ---------------------------------------------------------------------------
// Feed-forward and dropout

struct FeedForwardParams {
  Tensor W, b;
  FeedForwardParams() = default;
  FeedForwardParams(std::size_t in, std::size_t out, Rng& rng) {
    W = glorot_uniform(out, in, rng);
    b = Tensor::zeros({out});
  }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".W", W});
    out.push_back({prefix + ".b", b});
  }
};

inline Tensor feed_forward_relu(Tape& tp, const FeedForwardParams& p, const Tensor& x) {
  return tp.relu(tp.add(tp.matvec(p.W, x), p.b));
}

// Inverted dropout: scaling by 1/keep at train time, identity at inference.
inline Tensor dropout(Tape& tp, const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = coin(rng) ? 1.0 / keep : 0.0;
  return tp.mul(x, tp.constant(x.shape(), std::move(mask)));
}

}  // namespace jnet
