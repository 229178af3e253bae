#pragma once

// The jNet pipeline: embedding assembly, BiGRU input encoding, alignment
// with word-level Q-code and question-based filtering, residual aggregation,
// and two-directional boundary prediction, with the Q-code variants layered
// on the alignment output.

#include <utility>
#include <vector>

#include "jnet/adapt.hpp"
#include "jnet/config.hpp"
#include "jnet/data.hpp"
#include "jnet/layers.hpp"
#include "jnet/question.hpp"
#include "jnet/tensor.hpp"

namespace jnet {

struct EncodedPair {
  Tensor q_embed, d_embed;  // N x d_w, M x d_w
  Tensor q_ctx, d_ctx;      // N x d_c, M x d_c
};

struct AlignmentOutput {
  Tensor U;        // N x M similarity
  Tensor a;        // M x N, column softmaxes of U
  Tensor q_word;   // M x d_c word-level Q-code
  Tensor b;        // N x M, row softmaxes of U
  Tensor bf_max, bf_mean;  // M
  Tensor d_filtered;       // M x 2d_c
  Tensor I;                // M x (6d_c + 2)
};

struct BoundaryDistributions {
  Tensor ps_plus, pe_plus, ps_minus, pe_minus, ps, pe;  // M
  Tensor h_s_plus, h_e_minus;                           // d_agg
};

// U = Q^c D^c^T; a_j = softmax over the question axis; Q^w = a Q^c;
// b_i = softmax over the document axis; b^f = norm(pooling(b));
// I = [D^c, Q^w, D^c o Q^w, D^c - Q^w, D^f, b^f_max, b^f_mean].
inline AlignmentOutput align(Tape& tp, const Tensor& q_ctx, const Tensor& d_ctx) {
  if (q_ctx.shape().size() != 2 || d_ctx.shape().size() != 2 || q_ctx.rows() == 0 ||
      d_ctx.rows() == 0)
    throw DomainError("align: question and document encodings must be non-empty matrices");
  const std::size_t m = d_ctx.rows();
  AlignmentOutput out;
  out.U = tp.matmul(q_ctx, tp.transpose(d_ctx));
  out.a = tp.softmax(tp.transpose(out.U), 1.0, 1);
  out.q_word = tp.matmul(out.a, q_ctx);
  out.b = tp.softmax(out.U, 1.0, 1);
  out.bf_max = tp.normalize_sum(tp.max_over_rows(out.b));
  out.bf_mean = tp.normalize_sum(tp.mean_over_rows(out.b));
  out.d_filtered =
      tp.concat({tp.scale_rows(d_ctx, out.bf_max), tp.scale_rows(d_ctx, out.bf_mean)}, 1);
  out.I = tp.concat({d_ctx, out.q_word, tp.mul(d_ctx, out.q_word), tp.sub(d_ctx, out.q_word),
                     out.d_filtered, tp.reshape(out.bf_max, {m, 1}),
                     tp.reshape(out.bf_mean, {m, 1})},
                    1);
  return out;
}

// argmax over s <= e, e - s < L_max of P(s)_s P(e)_e; ties prefer the
// smaller s, then the smaller e.
inline TokenSpan decode_span(const std::vector<double>& ps, const std::vector<double>& pe,
                             std::size_t max_len) {
  const std::size_t m = ps.size();
  TokenSpan best{0, 0};
  double best_score = -1.0;
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t e = s; e < m && e - s < max_len; ++e) {
      const double score = ps[s] * pe[e];
      if (score > best_score) {
        best_score = score;
        best = {s, e};
      }
    }
  return best;
}

struct ForwardResult {
  EncodedPair enc;
  AlignmentOutput alignment;
  Tensor I_final;  // alignment output after the variant's Q-code extension
  Tensor I3;       // aggregated representation
  BoundaryDistributions dists;
  Tensor q_tl;         // TreeLSTM Q-code (TL variants)
  AdaptOutput adapted;  // adapt variant
};

class Model {
 public:
  Config cfg;
  EmbeddingTable words;
  CharCnnParams charcnn;
  GruParams enc_fwd, enc_bwd;  // shared question/document encoder
  GruParams agg1_f, agg1_b, agg2_f, agg2_b, agg3_f, agg3_b;
  Tensor w_s_plus, w_e_plus, w_h_plus;
  Tensor w_e_minus, w_s_minus, w_h_minus;
  TreeLstmParams treelstm;
  Tensor et_table;  // 11 x d_et
  ClusterBank bank;
  FeedForwardParams adapt_ff;

  Model(Config config, EmbeddingTable table) : cfg(std::move(config)), words(std::move(table)) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d_w = cfg.word_dim + 3 * cfg.char_channels;
    charcnn = CharCnnParams(cfg.char_dim, cfg.char_channels, rng);
    enc_fwd = GruParams(d_w, cfg.d_c / 2, rng);
    enc_bwd = GruParams(d_w, cfg.d_c / 2, rng);
    agg1_f = GruParams(alignment_width(), cfg.d_agg / 2, rng);
    agg1_b = GruParams(alignment_width(), cfg.d_agg / 2, rng);
    agg2_f = GruParams(cfg.d_agg, cfg.d_agg / 2, rng);
    agg2_b = GruParams(cfg.d_agg, cfg.d_agg / 2, rng);
    agg3_f = GruParams(cfg.d_agg, cfg.d_agg / 2, rng);
    agg3_b = GruParams(cfg.d_agg, cfg.d_agg / 2, rng);
    w_s_plus = glorot_uniform(1, cfg.d_agg, rng);
    w_e_plus = glorot_uniform(1, cfg.d_agg, rng);
    w_h_plus = glorot_uniform(1, cfg.d_agg, rng);
    w_e_minus = glorot_uniform(1, cfg.d_agg, rng);
    w_s_minus = glorot_uniform(1, cfg.d_agg, rng);
    w_h_minus = glorot_uniform(1, cfg.d_agg, rng);
    w_s_plus = flat(w_s_plus);
    w_e_plus = flat(w_e_plus);
    w_h_plus = flat(w_h_plus);
    w_e_minus = flat(w_e_minus);
    w_s_minus = flat(w_s_minus);
    w_h_minus = flat(w_h_minus);
    if (cfg.variant == Variant::ET) et_table = glorot_uniform(kNumQuestionTypes, cfg.d_et, rng);
    if (cfg.variant == Variant::TreeLstm || cfg.variant == Variant::TreeLstmAdapt)
      treelstm = TreeLstmParams(d_w, cfg.d_c, rng);
    if (cfg.variant == Variant::TreeLstmAdapt) {
      bank = ClusterBank(cfg.cluster_count, cfg.d_c, cfg.cluster_alpha, cfg.cluster_beta, rng);
      adapt_ff = FeedForwardParams(3 * cfg.d_c, cfg.d_c, rng);
    }
  }

  // Width of the aggregation input after the variant's Q-code extension.
  std::size_t alignment_width() const {
    std::size_t w = 6 * cfg.d_c + 2;
    switch (cfg.variant) {
      case Variant::Baseline: break;
      case Variant::ET: w += cfg.d_et; break;
      case Variant::TreeLstm:
      case Variant::TreeLstmAdapt: w += 2 * cfg.d_c + 1; break;
    }
    return w;
  }

  std::size_t word_width() const { return cfg.word_dim + 3 * cfg.char_channels; }

  // Trainable tensors in declared order (the checkpoint order). The word
  // table is always saved; freeze_embeddings only excludes it from Adam.
  std::vector<ParamRef> named_tensors() const {
    std::vector<ParamRef> out;
    out.push_back({"words", words.matrix});
    charcnn.collect("charcnn", out);
    enc_fwd.collect("enc.fwd", out);
    enc_bwd.collect("enc.bwd", out);
    agg1_f.collect("agg1.fwd", out);
    agg1_b.collect("agg1.bwd", out);
    agg2_f.collect("agg2.fwd", out);
    agg2_b.collect("agg2.bwd", out);
    agg3_f.collect("agg3.fwd", out);
    agg3_b.collect("agg3.bwd", out);
    out.push_back({"pred.w_s_plus", w_s_plus});
    out.push_back({"pred.w_e_plus", w_e_plus});
    out.push_back({"pred.w_h_plus", w_h_plus});
    out.push_back({"pred.w_e_minus", w_e_minus});
    out.push_back({"pred.w_s_minus", w_s_minus});
    out.push_back({"pred.w_h_minus", w_h_minus});
    if (cfg.variant == Variant::ET) out.push_back({"et.table", et_table});
    if (cfg.variant == Variant::TreeLstm || cfg.variant == Variant::TreeLstmAdapt)
      treelstm.collect("treelstm", out);
    if (cfg.variant == Variant::TreeLstmAdapt) adapt_ff.collect("adapt.ff", out);
    return out;
  }

  std::vector<ParamRef> trainable_params() const {
    std::vector<ParamRef> out = named_tensors();
    if (cfg.freeze_embeddings)
      out.erase(out.begin());  // "words" is first
    if (cfg.variant == Variant::TreeLstmAdapt && cfg.adapt_center_grads)
      out.push_back({"adapt.centers", bank.centers});
    return out;
  }

  Tensor embed_tokens(Tape& tp, const std::vector<Token>& tokens,
                      const std::vector<std::vector<std::size_t>>& char_ids) const {
    if (tokens.empty()) throw DomainError("embed: empty token sequence");
    std::vector<Tensor> rows;
    rows.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      Tensor wv = tp.row(words.matrix, words.lookup(tokens[i].text));
      Tensor cv = charcnn_embed(tp, charcnn, char_ids[i]);
      rows.push_back(tp.concat({wv, cv}));
    }
    return tp.stack_rows(rows);
  }

  EncodedPair encode(Tape& tp, const TokenizedExample& ex, bool training, Rng& rng) const {
    EncodedPair enc;
    enc.q_embed = embed_tokens(tp, ex.q_tokens, ex.q_char_ids);
    enc.d_embed = embed_tokens(tp, ex.d_tokens, ex.d_char_ids);
    enc.q_ctx = dropout(tp, bigru_encode(tp, enc_fwd, enc_bwd, enc.q_embed),
                        cfg.dropout_rate, training, rng);
    enc.d_ctx = dropout(tp, bigru_encode(tp, enc_fwd, enc_bwd, enc.d_embed),
                        cfg.dropout_rate, training, rng);
    return enc;
  }

  // I^1 = BiGRU(I); I^2 = I^1 + BiGRU(I^1); I^3 = I^2 + BiGRU(I^2)
  Tensor aggregate(Tape& tp, const Tensor& I, bool training, Rng& rng) const {
    Tensor in = dropout(tp, I, cfg.dropout_rate, training, rng);
    Tensor i1 = bigru_encode(tp, agg1_f, agg1_b, in);
    Tensor i2 = tp.add(i1, bigru_encode(tp, agg2_f, agg2_b, i1));
    return tp.add(i2, bigru_encode(tp, agg3_f, agg3_b, i2));
  }

  // Two-directional boundary prediction with mean pooling. h_{s+} is the
  // P(s+)-weighted soft selection of I^3 rows, broadcast into every end
  // logit; mirrored for the reverse direction.
  BoundaryDistributions predict(Tape& tp, const Tensor& I3) const {
    const std::size_t m = I3.rows();
    BoundaryDistributions d;
    d.ps_plus = tp.softmax(tp.matvec(I3, w_s_plus));
    d.h_s_plus = tp.matvec(tp.transpose(I3), d.ps_plus);
    d.pe_plus = tp.softmax(
        tp.add(tp.matvec(I3, w_e_plus), tp.broadcast(tp.dot(w_h_plus, d.h_s_plus), m)));
    d.pe_minus = tp.softmax(tp.matvec(I3, w_e_minus));
    d.h_e_minus = tp.matvec(tp.transpose(I3), d.pe_minus);
    d.ps_minus = tp.softmax(
        tp.add(tp.matvec(I3, w_s_minus), tp.broadcast(tp.dot(w_h_minus, d.h_e_minus), m)));
    d.ps = tp.scale(tp.add(d.ps_plus, d.ps_minus), 0.5);
    d.pe = tp.scale(tp.add(d.pe_plus, d.pe_minus), 0.5);
    return d;
  }

  ForwardResult forward(Tape& tp, const TokenizedExample& ex, bool training, Rng& rng) const {
    ForwardResult r;
    r.enc = encode(tp, ex, training, rng);
    r.alignment = align(tp, r.enc.q_ctx, r.enc.d_ctx);
    r.I_final = r.alignment.I;
    switch (cfg.variant) {
      case Variant::Baseline:
        break;
      case Variant::ET:
        r.I_final = et_extend(tp, r.alignment.I, ex.type_id, et_table);
        break;
      case Variant::TreeLstm: {
        r.q_tl = treelstm_qcode(tp, ex.parse, r.enc.q_embed, treelstm);
        r.I_final = qcode_filter_extend(tp, r.alignment.I, r.q_tl, r.enc.d_ctx,
                                        cfg.qcode_filter_softmax)
                        .extended;
        break;
      }
      case Variant::TreeLstmAdapt: {
        r.q_tl = treelstm_qcode(tp, ex.parse, r.enc.q_embed, treelstm);
        r.adapted = adapt_qcode(tp, bank, r.q_tl, adapt_ff, cfg.adapt_center_grads);
        r.I_final = qcode_filter_extend(tp, r.alignment.I, r.adapted.out, r.enc.d_ctx,
                                        cfg.qcode_filter_softmax)
                        .extended;
        break;
      }
    }
    r.I3 = aggregate(tp, r.I_final, training, rng);
    r.dists = predict(tp, r.I3);
    return r;
  }

  TokenSpan decode(const BoundaryDistributions& d) const {
    return decode_span(d.ps.values(), d.pe.values(), cfg.max_answer_len);
  }

 private:
  static Tensor flat(const Tensor& t) {
    return Tensor({t.size()}, t.values());
  }
};

}  // namespace jnet
