#pragma once

// SQuAD-format ingestion, offset-lossless tokenization, answer-span
// alignment, embedding and parse loading, and the synthetic corpus
// generator.

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "jnet/config.hpp"
#include "jnet/eval.hpp"
#include "jnet/layers.hpp"
#include "jnet/question.hpp"

namespace jnet {

struct Token {
  std::string text;
  std::size_t start = 0, end = 0;  // byte offsets into the source text
};

struct TokenSpan {
  std::size_t start = 0, end = 0;  // inclusive token indices
};

struct TokenizedExample {
  std::string qid;
  std::string question_text, document_text;
  std::vector<Token> q_tokens, d_tokens;
  std::vector<std::vector<std::size_t>> q_char_ids, d_char_ids;
  std::vector<std::string> gold_answers;  // raw strings, for scoring
  std::vector<TokenSpan> gold_spans;      // aligned token spans
  std::size_t type_id = 10;
  ParseTree parse;  // right-branching fallback when no parse was supplied
};

// Whitespace split, then leading/trailing punctuation peeled into their own
// tokens and contractions split at the apostrophe. Offsets reconstruct the
// source exactly.
inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t s = i, e = j;
    i = j;
    // leading punctuation
    while (s < e && is_punct(text[s]) && e - s > 1) {
      out.push_back({text.substr(s, 1), s, s + 1});
      ++s;
    }
    // trailing punctuation (emitted after the core)
    std::vector<Token> tail;
    while (e > s + 1 && is_punct(text[e - 1])) {
      tail.push_back({text.substr(e - 1, 1), e - 1, e});
      --e;
    }
    if (s < e) {
      std::size_t apos = text.find('\'', s + 1);
      if (apos != std::string::npos && apos < e) {
        out.push_back({text.substr(s, apos - s), s, apos});
        out.push_back({text.substr(apos, e - apos), apos, e});
      } else {
        out.push_back({text.substr(s, e - s), s, e});
      }
    }
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.push_back(*it);
  }
  return out;
}

inline std::vector<std::string> token_strings(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

inline std::vector<std::size_t> word_char_ids(const std::string& word) {
  std::vector<std::size_t> ids;
  ids.reserve(word.size());
  for (unsigned char c : word) ids.push_back(char_id(c));
  return ids;
}

// Character-offset answer to covering token span; offsets that land
// mid-token snap to the covering token. Returns false when no token covers
// the answer.
inline bool align_answer_span(const std::vector<Token>& doc_tokens, std::size_t ans_start,
                              std::size_t ans_len, TokenSpan& out) {
  if (doc_tokens.empty() || ans_len == 0) return false;
  const std::size_t ans_end = ans_start + ans_len;  // exclusive
  std::size_t s = doc_tokens.size(), e = doc_tokens.size();
  for (std::size_t i = 0; i < doc_tokens.size(); ++i) {
    if (doc_tokens[i].end > ans_start) {
      s = i;
      break;
    }
  }
  for (std::size_t i = doc_tokens.size(); i-- > 0;) {
    if (doc_tokens[i].start < ans_end) {
      e = i;
      break;
    }
  }
  if (s >= doc_tokens.size() || e >= doc_tokens.size() || s > e) return false;
  out = {s, e};
  return true;
}

inline std::string span_text(const std::string& doc, const std::vector<Token>& toks,
                             const TokenSpan& span) {
  const std::size_t a = toks.at(span.start).start;
  const std::size_t b = toks.at(span.end).end;
  return doc.substr(a, b - a);
}

struct LoadStats {
  std::size_t total = 0;
  std::size_t dropped_unaligned = 0;
  std::size_t parse_rejected = 0;
};

namespace detail {
inline const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("SQuAD schema: missing field '") + name + "'");
  return *it;
}
}  // namespace detail

// strict=true drops examples whose answers cannot be aligned (training);
// strict=false keeps them with best-effort spans (evaluation scores raw
// strings anyway).
inline std::vector<TokenizedExample> load_squad_json(const nlohmann::json& root, bool strict,
                                                     LoadStats* stats = nullptr) {
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  std::vector<TokenizedExample> out;
  for (const auto& article : detail::require_field(root, "data")) {
    for (const auto& para : detail::require_field(article, "paragraphs")) {
      const std::string context = detail::require_field(para, "context").get<std::string>();
      const auto d_tokens = tokenize(context);
      for (const auto& qa : detail::require_field(para, "qas")) {
        ++st.total;
        TokenizedExample ex;
        ex.qid = detail::require_field(qa, "id").get<std::string>();
        ex.question_text = detail::require_field(qa, "question").get<std::string>();
        ex.document_text = context;
        ex.q_tokens = tokenize(ex.question_text);
        ex.d_tokens = d_tokens;
        if (ex.q_tokens.empty() || ex.d_tokens.empty()) {
          ++st.dropped_unaligned;
          continue;
        }
        bool any_exact = false;
        for (const auto& ans : detail::require_field(qa, "answers")) {
          const std::string text = detail::require_field(ans, "text").get<std::string>();
          const std::size_t start =
              detail::require_field(ans, "answer_start").get<std::size_t>();
          ex.gold_answers.push_back(text);
          TokenSpan span;
          if (align_answer_span(ex.d_tokens, start, text.size(), span)) {
            const bool exact = normalize_answer(span_text(context, ex.d_tokens, span)) ==
                               normalize_answer(text);
            if (exact || !strict) {
              if (exact && !any_exact) {
                // exact alignments go first so training picks them
                ex.gold_spans.insert(ex.gold_spans.begin(), span);
                any_exact = true;
              } else {
                ex.gold_spans.push_back(span);
              }
            }
          }
        }
        if (ex.gold_answers.empty()) throw DataError("SQuAD schema: empty answers for " + ex.qid);
        if (strict && !any_exact) {
          ++st.dropped_unaligned;
          continue;
        }
        if (ex.gold_spans.empty()) ex.gold_spans.push_back({0, 0});
        for (const auto& t : ex.q_tokens) ex.q_char_ids.push_back(word_char_ids(t.text));
        for (const auto& t : ex.d_tokens) ex.d_char_ids.push_back(word_char_ids(t.text));
        ex.type_id = classify_question_type(token_strings(ex.q_tokens));
        ex.parse = right_branching_tree(ex.q_tokens.size());
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

inline std::vector<TokenizedExample> load_squad(const std::string& path, bool strict,
                                                LoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open SQuAD file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
  return load_squad_json(root, strict, stats);
}

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingTable {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::size_t> index;
  Tensor matrix;  // V x dim, trainable
  std::uint64_t seed = 0;
  double sigma = 0.1;

  std::size_t lookup(const std::string& word) const {
    auto it = index.find(word);
    if (it != index.end()) return it->second;
    it = index.find(lowercase(word));
    if (it != index.end()) return it->second;
    return 0;  // <unk>
  }
};

inline std::vector<std::string> build_vocab(const std::vector<TokenizedExample>& examples) {
  std::vector<std::string> vocab{"<unk>"};
  std::set<std::string> seen{"<unk>"};
  auto add = [&](const std::vector<Token>& toks) {
    for (const auto& t : toks)
      if (seen.insert(t.text).second) vocab.push_back(t.text);
  };
  for (const auto& ex : examples) {
    add(ex.q_tokens);
    add(ex.d_tokens);
  }
  return vocab;
}

// Pre-trained rows come from the text file (token then `dim` floats); OOV
// rows are Gaussian, reproducible from the seed in vocabulary order. An
// empty path leaves the whole table random (desk-scale corpora).
inline EmbeddingTable load_embeddings(const std::string& path,
                                      const std::vector<std::string>& vocab, std::size_t dim,
                                      std::uint64_t seed, double sigma) {
  EmbeddingTable table;
  table.vocab = vocab;
  table.seed = seed;
  table.sigma = sigma;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> values(vocab.size() * dim);
  for (double& v : values) v = g(rng);
  for (std::size_t i = 0; i < vocab.size(); ++i) table.index[vocab[i]] = i;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream is(line);
      std::string word;
      is >> word;
      auto it = table.index.find(word);
      std::vector<double> vec;
      double x;
      while (is >> x) vec.push_back(x);
      if (vec.size() != dim)
        throw DataError("embedding line " + std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " floats, got " + std::to_string(vec.size()));
      if (it != table.index.end())
        std::copy(vec.begin(), vec.end(), values.begin() + it->second * dim);
    }
  }
  table.matrix = Tensor({vocab.size(), dim}, std::move(values));
  return table;
}

// ---------------------------------------------------------------------------
// Parse files: one line per question, `<qid>\t<s-expression>`

inline std::map<std::string, std::string> load_parses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open parse file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("parse file line " + std::to_string(lineno) + ": expected <qid>\\t<tree>");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

// Trees whose leaves mismatch the tokenization are rejected and counted; a
// right-branching tree is substituted.
inline void attach_parses(std::vector<TokenizedExample>& examples,
                          const std::map<std::string, std::string>& parses,
                          LoadStats* stats = nullptr) {
  for (auto& ex : examples) {
    auto it = parses.find(ex.qid);
    if (it == parses.end()) continue;
    try {
      ex.parse = parse_sexpr_tree(it->second, token_strings(ex.q_tokens));
    } catch (const DataError&) {
      if (stats) ++stats->parse_rejected;
      ex.parse = right_branching_tree(ex.q_tokens.size());
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus: each document is a random token sequence holding a
// unique marker word; the question names the marker and the answer is the
// two-token span right after it. Templates cover all 11 question types.

struct SyntheticConfig {
  std::size_t n_train = 500;
  std::size_t n_dev = 100;
  std::size_t vocab_size = 200;
  std::size_t min_len = 10, max_len = 40;
  std::size_t answer_len = 2;
  std::uint64_t seed = 7;
};

inline nlohmann::json gen_synthetic_split(const SyntheticConfig& cfg, Rng& rng,
                                          std::set<std::string>& used_docs,
                                          const std::string& split, std::size_t count) {
  static const std::vector<std::string> templates = {
      "what follows %m ?",          "how does %m continue ?",
      "who comes after %m ?",       "when is %m next ?",
      "which tokens follow %m ?",   "where does %m point ?",
      "why pick %m ?",              "is %m before the answer ?",
      "whose span follows %m ?",    "whom does %m precede ?",
      "find the span after %m ."};
  auto word = [&](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%03zu", i);
    return std::string(buf);
  };
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_len, cfg.max_len);
  std::uniform_int_distribution<std::size_t> word_dist(0, cfg.vocab_size - 1);
  nlohmann::json paragraphs = nlohmann::json::array();
  std::size_t made = 0, attempts = 0;
  while (made < count) {
    if (++attempts > count * 100)
      throw DataError("gen_synthetic: cannot build enough distinct documents");
    const std::size_t len = len_dist(rng);
    const std::size_t marker_id = word_dist(rng);
    const std::string marker = word(marker_id);
    std::uniform_int_distribution<std::size_t> pos_dist(0, len - cfg.answer_len - 2);
    const std::size_t pos = pos_dist(rng);
    std::vector<std::string> doc(len);
    for (auto& t : doc) {
      do {
        t = word(word_dist(rng));
      } while (t == marker);
    }
    doc[pos] = marker;
    std::string context;
    std::vector<std::size_t> starts(len);
    for (std::size_t i = 0; i < len; ++i) {
      starts[i] = context.size();
      context += doc[i];
      if (i + 1 < len) context.push_back(' ');
    }
    if (!used_docs.insert(context).second) continue;
    std::string answer;
    for (std::size_t i = 0; i < cfg.answer_len; ++i) {
      if (i) answer.push_back(' ');
      answer += doc[pos + 1 + i];
    }
    const std::size_t type_id = made % templates.size();
    std::string question = templates[type_id];
    question.replace(question.find("%m"), 2, marker);
    char qid[64];
    std::snprintf(qid, sizeof(qid), "synth-%s-%05zu", split.c_str(), made);
    nlohmann::json qa = {{"question", question},
                         {"id", std::string(qid)},
                         {"answers", {{{"text", answer}, {"answer_start", starts[pos + 1]}}}}};
    paragraphs.push_back({{"context", context}, {"qas", {qa}}});
    ++made;
  }
  return {{"data", {{{"title", "synthetic-" + split}, {"paragraphs", paragraphs}}}},
          {"version", "1.1"}};
}

inline std::pair<nlohmann::json, nlohmann::json> gen_synthetic(const SyntheticConfig& cfg) {
  Rng rng(cfg.seed);
  std::set<std::string> used_docs;
  nlohmann::json train = gen_synthetic_split(cfg, rng, used_docs, "train", cfg.n_train);
  nlohmann::json dev = gen_synthetic_split(cfg, rng, used_docs, "dev", cfg.n_dev);
  return {train, dev};
}

inline std::vector<TokenizedExample> drop_long_documents(std::vector<TokenizedExample> in,
                                                         std::size_t max_doc_len) {
  std::vector<TokenizedExample> out;
  for (auto& ex : in)
    if (ex.d_tokens.size() <= max_doc_len) out.push_back(std::move(ex));
  return out;
}

}  // namespace jnet
