#pragma once

// Training: span NLL loss, Adam, learning-rate halving with patience-based
// early stopping, per-example cluster-bank updates, and binary checkpoints.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jnet/eval.hpp"
#include "jnet/model.hpp"

namespace jnet {

// -log P(s)[s*] - log P(e)[e*], probabilities clamped at 1e-12 before log.
inline Tensor span_loss(Tape& tp, const BoundaryDistributions& d, const TokenSpan& gold) {
  const std::size_t m = d.ps.size();
  if (gold.start > gold.end || gold.end >= m)
    throw DataError("span_loss: gold span (" + std::to_string(gold.start) + "," +
                    std::to_string(gold.end) + ") out of range for M=" + std::to_string(m));
  Tensor ls = tp.log(tp.clamp_min(tp.pick(d.ps, gold.start), 1e-12));
  Tensor le = tp.log(tp.clamp_min(tp.pick(d.pe, gold.end), 1e-12));
  return tp.scale(tp.add(ls, le), -1.0);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;

  void match(const std::vector<ParamRef>& params) {
    if (m.size() == params.size()) return;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.tensor.size(), 0.0);
      v.emplace_back(p.tensor.size(), 0.0);
    }
  }
};

inline void adam_step(std::vector<ParamRef>& params, AdamState& st, double lr, double beta1,
                      double beta2, double eps) {
  st.match(params);
  ++st.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& val = params[p].tensor.values();
    const auto& grad = params[p].tensor.grad();
    auto& m = st.m[p];
    auto& v = st.v[p];
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

inline void zero_param_grads(std::vector<ParamRef>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

inline void clip_global_norm(std::vector<ParamRef>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (auto& p : params)
    for (double g : p.tensor.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& p : params)
    for (double& g : p.tensor.grad_mut()) g *= scale;
}

// ---------------------------------------------------------------------------
// Evaluation

inline EvalReport evaluate(const Model& model, const std::vector<TokenizedExample>& examples) {
  std::vector<ExampleScore> scores;
  scores.reserve(examples.size());
  Rng rng(0);  // unused: dropout is inactive outside training
  for (const auto& ex : examples) {
    Tape tp(false);
    ForwardResult r = model.forward(tp, ex, false, rng);
    TokenSpan span = model.decode(r.dists);
    ExampleScore s;
    s.qid = ex.qid;
    s.prediction = span_text(ex.document_text, ex.d_tokens, span);
    s.em = exact_match(s.prediction, ex.gold_answers);
    s.f1 = f1_score(s.prediction, ex.gold_answers);
    s.type_id = ex.type_id;
    double best = -1.0;
    for (const auto& g : ex.gold_answers) {
      const double f = f1_score(s.prediction, {g});
      if (f > best) {
        best = f;
        s.best_gold = g;
      }
    }
    scores.push_back(std::move(s));
  }
  return analyze(std::move(scores));
}

// ---------------------------------------------------------------------------
// Checkpoints: magic JNET1, then config, vocabulary, metadata, and
// length-prefixed named tensors (little-endian 64-bit floats) in declared
// order, followed by the Adam moments.

namespace detail {
inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(os, bits);
}
inline double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}
inline void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_str(std::istream& is) {
  std::string s(read_u64(is), '\0');
  is.read(s.data(), static_cast<std::streamsize>(s.size()));
  if (!is) throw DataError("checkpoint: truncated string");
  return s;
}
inline void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  write_str(os, name);
  write_u64(os, t.shape().size());
  for (std::size_t d : t.shape()) write_u64(os, d);
  for (double v : t.values()) write_f64(os, v);
}
inline void write_vec(std::ostream& os, const std::string& name,
                      const std::vector<double>& v) {
  write_str(os, name);
  write_u64(os, 1);
  write_u64(os, v.size());
  for (double x : v) write_f64(os, x);
}
}  // namespace detail

struct CheckpointMeta {
  std::size_t epoch = 0;
  double dev_em = 0.0, dev_f1 = 0.0;
};

inline void save_checkpoint(const std::string& path, const Model& model,
                            const AdamState& adam, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write("JNET1", 5);
  detail::write_str(os, model.cfg.serialize());
  detail::write_u64(os, model.words.vocab.size());
  for (const auto& w : model.words.vocab) detail::write_str(os, w);
  detail::write_u64(os, meta.epoch);
  detail::write_f64(os, meta.dev_em);
  detail::write_f64(os, meta.dev_f1);
  auto tensors = model.named_tensors();
  if (model.cfg.variant == Variant::TreeLstmAdapt)
    tensors.push_back({"adapt.centers", model.bank.centers});
  detail::write_u64(os, tensors.size());
  for (const auto& t : tensors) detail::write_tensor(os, t.name, t.tensor);
  detail::write_u64(os, adam.t);
  detail::write_u64(os, adam.m.size());
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    detail::write_vec(os, "adam.m." + std::to_string(i), adam.m[i]);
    detail::write_vec(os, "adam.v." + std::to_string(i), adam.v[i]);
  }
  if (!os) throw DataError("checkpoint write failed: " + path);
}

inline Model load_checkpoint(const std::string& path, AdamState* adam_out = nullptr,
                             CheckpointMeta* meta_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::string(magic, 5) != "JNET1")
    throw DataError("checkpoint: bad magic in " + path);
  std::istringstream cfg_in(detail::read_str(is));
  Config cfg = Config::parse(cfg_in);
  std::vector<std::string> vocab(detail::read_u64(is));
  for (auto& w : vocab) w = detail::read_str(is);
  CheckpointMeta meta;
  meta.epoch = detail::read_u64(is);
  meta.dev_em = detail::read_f64(is);
  meta.dev_f1 = detail::read_f64(is);
  EmbeddingTable table = load_embeddings("", vocab, cfg.word_dim, cfg.seed, cfg.oov_sigma);
  Model model(cfg, std::move(table));
  auto tensors = model.named_tensors();
  if (cfg.variant == Variant::TreeLstmAdapt)
    tensors.push_back({"adapt.centers", model.bank.centers});
  const std::uint64_t n = detail::read_u64(is);
  if (n != tensors.size())
    throw DataError("checkpoint: expected " + std::to_string(tensors.size()) +
                    " tensors, found " + std::to_string(n));
  for (auto& t : tensors) {
    const std::string name = detail::read_str(is);
    if (name != t.name) throw DataError("checkpoint: tensor order mismatch at " + name);
    Shape shape(detail::read_u64(is));
    for (auto& d : shape) d = detail::read_u64(is);
    if (shape != t.tensor.shape())
      throw DataError("checkpoint: shape mismatch for " + name);
    auto& val = t.tensor.values();
    for (auto& v : val) v = detail::read_f64(is);
  }
  AdamState adam;
  adam.t = detail::read_u64(is);
  const std::uint64_t nm = detail::read_u64(is);
  for (std::uint64_t i = 0; i < nm; ++i) {
    detail::read_str(is);
    detail::read_u64(is);
    std::vector<double> m(detail::read_u64(is));
    for (auto& x : m) x = detail::read_f64(is);
    detail::read_str(is);
    detail::read_u64(is);
    std::vector<double> v(detail::read_u64(is));
    for (auto& x : v) x = detail::read_f64(is);
    adam.m.push_back(std::move(m));
    adam.v.push_back(std::move(v));
  }
  if (adam_out) *adam_out = std::move(adam);
  if (meta_out) *meta_out = meta;
  return model;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_em = 0.0, dev_f1 = 0.0;
  double lr = 0.0;
  bool bad = false;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_em = 0.0, best_f1 = 0.0;
  bool early_stopped = false;
};

// A "bad iteration" is an epoch with no improvement of dev EM+F1 over the
// best seen; the learning rate halves on each bad epoch (or once per bad
// streak when halve_per_bad_epoch is off) and training stops after
// `patience` consecutive bad epochs. The model is left at the best-dev
// parameters.
inline TrainResult train(Model& model, const std::vector<TokenizedExample>& train_set_in,
                         const std::vector<TokenizedExample>& dev_set, AdamState& adam,
                         const std::function<void(const EpochStats&)>& on_epoch = nullptr,
                         const std::function<bool(const EvalReport&, const EvalReport&)>&
                             stop_when = nullptr) {
  const Config& cfg = model.cfg;
  auto train_set = drop_long_documents(train_set_in, cfg.max_doc_len);
  if (train_set.empty()) throw ConfigError("train: empty training set");
  auto params = model.trainable_params();
  adam.match(params);
  Rng rng(cfg.seed);
  double lr = cfg.lr;
  TrainResult result;
  double best_score = -1.0;
  std::size_t bad_streak = 0;
  // snapshot of the best-dev state (tensors, bank, moments)
  std::vector<std::vector<double>> best_tensors;
  std::vector<double> best_centers;
  AdamState best_adam;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& ex = train_set[order[i]];
        Tape tp;
        ForwardResult r = model.forward(tp, ex, true, rng);
        Tensor loss = span_loss(tp, r.dists, ex.gold_spans.front());
        epoch_loss += loss.item();
        ++seen;
        tp.backward(tp.scale(loss, inv_batch));
        if (cfg.variant == Variant::TreeLstmAdapt)
          update_centers(model.bank, r.q_tl.values(), r.adapted.weights.values());
      }
      clip_global_norm(params, cfg.grad_clip);
      adam_step(params, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      zero_param_grads(params);
    }
    EvalReport dev = evaluate(model, dev_set);
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = seen ? epoch_loss / static_cast<double>(seen) : 0.0;
    st.dev_em = dev.em;
    st.dev_f1 = dev.f1;
    st.lr = lr;
    const double score = dev.em + dev.f1;
    if (score > best_score) {
      best_score = score;
      bad_streak = 0;
      result.best_epoch = epoch;
      result.best_em = dev.em;
      result.best_f1 = dev.f1;
      best_tensors.clear();
      for (const auto& p : model.named_tensors()) best_tensors.push_back(p.tensor.values());
      if (cfg.variant == Variant::TreeLstmAdapt) best_centers = model.bank.centers.values();
      best_adam = adam;
    } else {
      ++bad_streak;
      st.bad = true;
      if (cfg.halve_per_bad_epoch || bad_streak == 1) lr *= 0.5;
    }
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
    if (stop_when && stop_when(evaluate(model, train_set), dev)) break;
    if (bad_streak >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  // restore the best-dev state
  if (!best_tensors.empty()) {
    auto tensors = model.named_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].tensor.values() = best_tensors[i];
    if (cfg.variant == Variant::TreeLstmAdapt && !best_centers.empty())
      model.bank.centers.values() = best_centers;
    adam = best_adam;
  }
  return result;
}

}  // namespace jnet
