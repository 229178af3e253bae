#pragma once

// Per-layer finite-difference gradient suite over every trainable stage of
// the model, plus a full-model end-to-end check on a toy instance.

#include <string>
#include <vector>

#include "jnet/gradcheck.hpp"
#include "jnet/model.hpp"
#include "jnet/train.hpp"

namespace jnet {

struct LayerCheck {
  std::string name;
  double max_rel_err = 0.0;
};

namespace detail {

inline Tensor random_tensor(Shape shape, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v));
}

// random linear functional of a tensor, so no gradient component cancels
inline Tensor probe(Tape& tp, const Tensor& x, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(x.size());
  for (double& v : w) v = g(rng);
  return tp.sum(tp.mul(tp.reshape(x, {x.size()}), tp.constant({x.size()}, std::move(w))));
}

inline TokenizedExample toy_example() {
  TokenizedExample ex;
  ex.qid = "toy";
  ex.question_text = "what follows w2 ?";
  ex.document_text = "w0 w1 w2 w3 w4 w5";
  ex.q_tokens = tokenize(ex.question_text);
  ex.d_tokens = tokenize(ex.document_text);
  for (const auto& t : ex.q_tokens) ex.q_char_ids.push_back(word_char_ids(t.text));
  for (const auto& t : ex.d_tokens) ex.d_char_ids.push_back(word_char_ids(t.text));
  ex.type_id = classify_question_type(token_strings(ex.q_tokens));
  ex.parse = right_branching_tree(ex.q_tokens.size());
  ex.gold_answers = {"w3 w4"};
  ex.gold_spans = {{3, 4}};
  return ex;
}

inline Model toy_model(Variant variant, std::uint64_t seed) {
  Config cfg;
  cfg.variant = variant;
  cfg.word_dim = 8;
  cfg.char_dim = 2;
  cfg.char_channels = 2;
  cfg.d_c = 8;
  cfg.d_agg = 8;
  cfg.d_et = 4;
  cfg.cluster_count = 3;
  cfg.dropout_rate = 0.0;
  cfg.seed = seed;
  std::vector<std::string> vocab = {"<unk>", "w0", "w1", "w2", "w3", "w4", "w5",
                                    "what", "follows", "?"};
  EmbeddingTable table = load_embeddings("", vocab, cfg.word_dim, seed, 0.5);
  return Model(cfg, std::move(table));
}

inline std::vector<Tensor> tensors_of(const std::vector<ParamRef>& refs) {
  std::vector<Tensor> out;
  for (const auto& r : refs) out.push_back(r.tensor);
  return out;
}

}  // namespace detail

inline std::vector<LayerCheck> gradcheck_suite(std::uint64_t seed = 123) {
  using detail::probe;
  using detail::random_tensor;
  std::vector<LayerCheck> results;
  Rng rng(seed);

  {  // GRU step
    Rng prng(seed + 1);
    GruParams p(3, 2, prng);
    Tensor x = random_tensor({3}, prng);
    Tensor h = random_tensor({2}, prng);
    std::vector<ParamRef> refs;
    p.collect("gru", refs);
    std::vector<Tensor> watched = detail::tensors_of(refs);
    watched.push_back(x);
    watched.push_back(h);
    Rng wrng(seed + 2);
    std::vector<double> w = {0.7, -1.3};
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      return tp.sum(tp.mul(gru_step(tp, p, x, h), tp.constant({2}, w)));
    });
    results.push_back({"gru_step", err});
  }

  {  // BiGRU encoder
    Rng prng(seed + 3);
    GruParams f(3, 2, prng), b(3, 2, prng);
    Tensor seq = random_tensor({3, 3}, prng);
    std::vector<ParamRef> refs;
    f.collect("f", refs);
    b.collect("b", refs);
    std::vector<Tensor> watched = detail::tensors_of(refs);
    watched.push_back(seq);
    Rng wrng(seed + 4);
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng local(seed + 4);
      return probe(tp, bigru_encode(tp, f, b, seq), local);
    });
    results.push_back({"bigru", err});
  }

  {  // CharCNN
    Rng prng(seed + 5);
    CharCnnParams p(3, 2, prng);
    std::vector<std::size_t> ids = word_char_ids("cat");
    std::vector<ParamRef> refs;
    p.collect("cnn", refs);
    double err = gradcheck_max_rel_err(detail::tensors_of(refs), [&](Tape& tp) {
      Rng local(seed + 6);
      return probe(tp, charcnn_embed(tp, p, ids), local);
    });
    results.push_back({"charcnn", err});
  }

  {  // TreeLSTM node
    Rng prng(seed + 7);
    TreeLstmParams p(3, 3, prng);
    Tensor x = random_tensor({3}, prng);
    Tensor hl = random_tensor({3}, prng), cl = random_tensor({3}, prng);
    Tensor hr = random_tensor({3}, prng), cr = random_tensor({3}, prng);
    std::vector<ParamRef> refs;
    p.collect("tree", refs);
    std::vector<Tensor> watched = detail::tensors_of(refs);
    for (const Tensor& t : {x, hl, cl, hr, cr}) watched.push_back(t);
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng local(seed + 8);
      TreeLstmState s = treelstm_node(tp, p, x, hl, cl, hr, cr);
      return tp.add(probe(tp, s.h, local), probe(tp, s.c, local));
    });
    results.push_back({"treelstm_node", err});
  }

  {  // alignment
    Rng prng(seed + 9);
    Tensor q = random_tensor({3, 4}, prng);
    Tensor d = random_tensor({5, 4}, prng);
    double err = gradcheck_max_rel_err({q, d}, [&](Tape& tp) {
      Rng local(seed + 10);
      return probe(tp, align(tp, q, d).I, local);
    });
    results.push_back({"alignment", err});
  }

  {  // aggregation (three residual BiGRUs)
    Rng prng(seed + 11);
    Model m = detail::toy_model(Variant::Baseline, seed + 11);
    Tensor I = random_tensor({4, m.alignment_width()}, prng, 0.5);
    std::vector<ParamRef> refs;
    m.agg1_f.collect("a1f", refs);
    m.agg1_b.collect("a1b", refs);
    m.agg2_f.collect("a2f", refs);
    m.agg2_b.collect("a2b", refs);
    m.agg3_f.collect("a3f", refs);
    m.agg3_b.collect("a3b", refs);
    std::vector<Tensor> watched = detail::tensors_of(refs);
    watched.push_back(I);
    Rng dummy(0);
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng local(seed + 12);
      Rng drng(0);
      return probe(tp, m.aggregate(tp, I, false, drng), local);
    });
    results.push_back({"aggregation", err});
  }

  {  // prediction
    Rng prng(seed + 13);
    Model m = detail::toy_model(Variant::Baseline, seed + 13);
    Tensor I3 = random_tensor({5, m.cfg.d_agg}, prng, 0.5);
    std::vector<Tensor> watched = {I3,        m.w_s_plus,  m.w_e_plus,  m.w_h_plus,
                                   m.w_e_minus, m.w_s_minus, m.w_h_minus};
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng local(seed + 14);
      BoundaryDistributions d = m.predict(tp, I3);
      Tensor all = tp.concat({d.ps_plus, d.pe_plus, d.ps_minus, d.pe_minus, d.ps, d.pe});
      return probe(tp, all, local);
    });
    results.push_back({"prediction", err});
  }

  {  // discriminative block
    Rng prng(seed + 15);
    ClusterBank bank(3, 4, 5.0, 0.01, prng);
    FeedForwardParams ff(12, 4, prng);
    Tensor x = random_tensor({4}, prng);
    std::vector<ParamRef> refs;
    ff.collect("ff", refs);
    std::vector<Tensor> watched = detail::tensors_of(refs);
    watched.push_back(x);
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng local(seed + 16);
      AdaptOutput out = adapt(tp, bank, x, ff);
      return tp.add(probe(tp, out.out, local), probe(tp, out.weights, local));
    });
    results.push_back({"discriminative_block", err});
  }

  {  // loss through prediction
    Rng prng(seed + 17);
    Model m = detail::toy_model(Variant::Baseline, seed + 17);
    Tensor I3 = random_tensor({5, m.cfg.d_agg}, prng, 0.5);
    std::vector<Tensor> watched = {I3,        m.w_s_plus,  m.w_e_plus,  m.w_h_plus,
                                   m.w_e_minus, m.w_s_minus, m.w_h_minus};
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      return span_loss(tp, m.predict(tp, I3), {1, 3});
    });
    results.push_back({"loss", err});
  }

  {  // full model, 4-token question / 6-token document, d_c=8, K=3
    Model m = detail::toy_model(Variant::TreeLstmAdapt, seed + 19);
    TokenizedExample ex = detail::toy_example();
    std::vector<Tensor> watched = detail::tensors_of(m.trainable_params());
    Rng dummy(0);
    double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
      Rng drng(0);
      ForwardResult r = m.forward(tp, ex, false, drng);
      return span_loss(tp, r.dists, ex.gold_spans.front());
    });
    results.push_back({"full_model", err});
  }

  return results;
}

}  // namespace jnet
