#pragma once

// Exact-match / F1 scoring with SQuAD-style answer normalization, per-type
// breakdown, and F1-composition analysis.

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jnet/errors.hpp"
#include "jnet/question.hpp"

namespace jnet {

// lowercase, strip punctuation, drop the articles a/an/the, collapse spaces
inline std::string normalize_answer(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    lowered.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream is(lowered);
  std::string word, out;
  while (is >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

inline std::vector<std::string> normalized_tokens(const std::string& text) {
  std::istringstream is(normalize_answer(text));
  std::vector<std::string> toks;
  std::string w;
  while (is >> w) toks.push_back(w);
  return toks;
}

inline int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
  if (golds.empty()) throw DataError("exact_match: no gold answers");
  const std::string p = normalize_answer(pred);
  for (const auto& g : golds)
    if (p == normalize_answer(g)) return 1;
  return 0;
}

// Token-bag F1 against the best gold. Both sides empty after normalization
// counts as a perfect match.
inline double f1_score(const std::string& pred, const std::vector<std::string>& golds) {
  if (golds.empty()) throw DataError("f1_score: no gold answers");
  const auto ptoks = normalized_tokens(pred);
  double best = 0.0;
  for (const auto& g : golds) {
    const auto gtoks = normalized_tokens(g);
    if (ptoks.empty() || gtoks.empty()) {
      best = std::max(best, (ptoks.empty() && gtoks.empty()) ? 1.0 : 0.0);
      continue;
    }
    std::map<std::string, int> counts;
    for (const auto& t : gtoks) ++counts[t];
    int overlap = 0;
    for (const auto& t : ptoks) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    if (overlap == 0) continue;
    const double precision = static_cast<double>(overlap) / ptoks.size();
    const double recall = static_cast<double>(overlap) / gtoks.size();
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

struct ExampleScore {
  std::string qid;
  std::string prediction;
  std::string best_gold;
  int em = 0;
  double f1 = 0.0;
  std::size_t type_id = 10;
};

struct TypeBucket {
  std::size_t count = 0;
  double em = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double em = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;
  std::vector<TypeBucket> per_type;  // 11 buckets
  double frac_exact = 0.0;           // F1 == 1
  double frac_zero = 0.0;            // F1 == 0
  double frac_partial = 0.0;
  double mean_partial_f1 = 0.0;
  std::vector<ExampleScore> examples;
};

inline EvalReport analyze(std::vector<ExampleScore> scores) {
  EvalReport r;
  r.per_type.assign(kNumQuestionTypes, TypeBucket{});
  r.count = scores.size();
  std::size_t n_exact = 0, n_zero = 0, n_partial = 0;
  double partial_sum = 0.0;
  for (const auto& s : scores) {
    r.em += s.em;
    r.f1 += s.f1;
    auto& b = r.per_type.at(s.type_id);
    ++b.count;
    b.em += s.em;
    b.f1 += s.f1;
    if (s.f1 >= 1.0) ++n_exact;
    else if (s.f1 <= 0.0) ++n_zero;
    else {
      ++n_partial;
      partial_sum += s.f1;
    }
  }
  if (r.count > 0) {
    r.em /= r.count;
    r.f1 /= r.count;
    r.frac_exact = static_cast<double>(n_exact) / r.count;
    r.frac_zero = static_cast<double>(n_zero) / r.count;
    r.frac_partial = static_cast<double>(n_partial) / r.count;
  }
  if (n_partial > 0) r.mean_partial_f1 = partial_sum / n_partial;
  for (auto& b : r.per_type) {
    if (b.count > 0) {
      b.em /= b.count;
      b.f1 /= b.count;
    }
  }
  r.examples = std::move(scores);
  return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["em"] = r.em;
  j["f1"] = r.f1;
  j["count"] = r.count;
  nlohmann::json types = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumQuestionTypes; ++i) {
    const auto& b = r.per_type[i];
    types[question_type_names()[i]] = {{"count", b.count}, {"em", b.em}, {"f1", b.f1}};
  }
  j["per_type"] = types;
  j["composition"] = {{"frac_exact", r.frac_exact},
                      {"frac_zero", r.frac_zero},
                      {"frac_partial", r.frac_partial},
                      {"mean_partial_f1", r.mean_partial_f1}};
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& s : r.examples)
    ex.push_back({{"qid", s.qid},
                  {"prediction", s.prediction},
                  {"best_gold", s.best_gold},
                  {"em", s.em},
                  {"f1", s.f1},
                  {"type", question_type_names()[s.type_id]}});
  j["examples"] = ex;
  return j;
}

inline std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %8s %8s %8s\n", "type", "count", "EM", "F1");
  os << line;
  for (std::size_t i = 0; i < kNumQuestionTypes; ++i) {
    const auto& b = r.per_type[i];
    std::snprintf(line, sizeof(line), "%-8s %8zu %8.4f %8.4f\n",
                  question_type_names()[i].c_str(), b.count, b.em, b.f1);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-8s %8zu %8.4f %8.4f\n", "overall", r.count, r.em, r.f1);
  os << line;
  std::snprintf(line, sizeof(line),
                "composition: exact %.4f  zero %.4f  partial %.4f (mean F1 %.4f)\n",
                r.frac_exact, r.frac_zero, r.frac_partial, r.mean_partial_f1);
  os << line;
  return os.str();
}

}  // namespace jnet
