#pragma once

// Run configuration: every hyperparameter plus the knobs for choices the
// model leaves open. Serialized as UTF-8 key=value lines; unknown keys are
// rejected so stale config files fail loudly.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "jnet/errors.hpp"

namespace jnet {

enum class Variant { Baseline, ET, TreeLstm, TreeLstmAdapt };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::ET: return "+ET";
    case Variant::TreeLstm: return "+TreeLSTM";
    case Variant::TreeLstmAdapt: return "+TreeLSTM-adapt";
  }
  return "baseline";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "+ET" || s == "et") return Variant::ET;
  if (s == "+TreeLSTM" || s == "treelstm") return Variant::TreeLstm;
  if (s == "+TreeLSTM-adapt" || s == "treelstm-adapt") return Variant::TreeLstmAdapt;
  throw ConfigError("unknown variant: " + s);
}

struct Config {
  Variant variant = Variant::Baseline;

  // dimensions
  std::size_t word_dim = 300;
  std::size_t char_dim = 20;
  std::size_t char_channels = 50;
  std::size_t d_c = 500;    // contextual encoding width (BiGRU output)
  std::size_t d_agg = 500;  // aggregation BiGRU output width
  std::size_t d_et = 50;    // explicit question-type embedding width

  // discriminative block
  std::size_t cluster_count = 100;  // K
  double cluster_alpha = 50.0;
  double cluster_beta = 0.01;
  bool adapt_center_grads = false;    // experimental: backprop into centers
  bool qcode_filter_softmax = false;  // alternative to relu+norm filter weights

  // optimization
  double lr = 0.0004;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  double dropout_rate = 0.5;
  std::size_t patience = 7;
  std::size_t max_epochs = 200;
  std::size_t max_doc_len = 500;
  bool halve_per_bad_epoch = true;  // alternative: halve once per patience window
  bool freeze_embeddings = false;
  double grad_clip = 0.0;  // global-norm clip, 0 disables

  // decoding and data
  std::size_t max_answer_len = 30;  // L_max
  double oov_sigma = 0.1;
  std::uint64_t seed = 42;

  void validate() const {
    if (d_c % 2 != 0) throw ConfigError("d_c must be even (two GRU directions)");
    if (d_agg % 2 != 0) throw ConfigError("d_agg must be even (two GRU directions)");
    if (cluster_count < 1) throw ConfigError("cluster_count must be >= 1");
    if (cluster_alpha <= 0) throw ConfigError("cluster_alpha must be positive");
    if (cluster_beta < 0 || cluster_beta > 1) throw ConfigError("cluster_beta must be in [0,1]");
    if (dropout_rate < 0 || dropout_rate >= 1) throw ConfigError("dropout_rate must be in [0,1)");
    if (batch_size == 0 || max_epochs == 0 || patience == 0)
      throw ConfigError("batch_size, max_epochs and patience must be positive");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (max_answer_len == 0) throw ConfigError("max_answer_len must be positive");
  }

  std::string serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "variant=" << variant_name(variant) << "\n";
    os << "word_dim=" << word_dim << "\n";
    os << "char_dim=" << char_dim << "\n";
    os << "char_channels=" << char_channels << "\n";
    os << "d_c=" << d_c << "\n";
    os << "d_agg=" << d_agg << "\n";
    os << "d_et=" << d_et << "\n";
    os << "cluster_count=" << cluster_count << "\n";
    os << "cluster_alpha=" << cluster_alpha << "\n";
    os << "cluster_beta=" << cluster_beta << "\n";
    os << "adapt_center_grads=" << (adapt_center_grads ? 1 : 0) << "\n";
    os << "qcode_filter_softmax=" << (qcode_filter_softmax ? 1 : 0) << "\n";
    os << "lr=" << lr << "\n";
    os << "adam_beta1=" << adam_beta1 << "\n";
    os << "adam_beta2=" << adam_beta2 << "\n";
    os << "adam_eps=" << adam_eps << "\n";
    os << "batch_size=" << batch_size << "\n";
    os << "dropout_rate=" << dropout_rate << "\n";
    os << "patience=" << patience << "\n";
    os << "max_epochs=" << max_epochs << "\n";
    os << "max_doc_len=" << max_doc_len << "\n";
    os << "halve_per_bad_epoch=" << (halve_per_bad_epoch ? 1 : 0) << "\n";
    os << "freeze_embeddings=" << (freeze_embeddings ? 1 : 0) << "\n";
    os << "grad_clip=" << grad_clip << "\n";
    os << "max_answer_len=" << max_answer_len << "\n";
    os << "oov_sigma=" << oov_sigma << "\n";
    os << "seed=" << seed << "\n";
    return os.str();
  }

  void set(const std::string& key, const std::string& value) {
    auto to_u = [&](const std::string& v) -> std::uint64_t {
      try {
        return std::stoull(v);
      } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
      }
    };
    auto to_d = [&](const std::string& v) -> double {
      try {
        return std::stod(v);
      } catch (...) {
        throw ConfigError("config: bad number for " + key + ": " + v);
      }
    };
    auto to_b = [&](const std::string& v) -> bool {
      if (v == "1" || v == "true") return true;
      if (v == "0" || v == "false") return false;
      throw ConfigError("config: bad boolean for " + key + ": " + v);
    };
    if (key == "variant") variant = parse_variant(value);
    else if (key == "word_dim") word_dim = to_u(value);
    else if (key == "char_dim") char_dim = to_u(value);
    else if (key == "char_channels") char_channels = to_u(value);
    else if (key == "d_c") d_c = to_u(value);
    else if (key == "d_agg") d_agg = to_u(value);
    else if (key == "d_et") d_et = to_u(value);
    else if (key == "cluster_count") cluster_count = to_u(value);
    else if (key == "cluster_alpha") cluster_alpha = to_d(value);
    else if (key == "cluster_beta") cluster_beta = to_d(value);
    else if (key == "adapt_center_grads") adapt_center_grads = to_b(value);
    else if (key == "qcode_filter_softmax") qcode_filter_softmax = to_b(value);
    else if (key == "lr") lr = to_d(value);
    else if (key == "adam_beta1") adam_beta1 = to_d(value);
    else if (key == "adam_beta2") adam_beta2 = to_d(value);
    else if (key == "adam_eps") adam_eps = to_d(value);
    else if (key == "batch_size") batch_size = to_u(value);
    else if (key == "dropout_rate") dropout_rate = to_d(value);
    else if (key == "patience") patience = to_u(value);
    else if (key == "max_epochs") max_epochs = to_u(value);
    else if (key == "max_doc_len") max_doc_len = to_u(value);
    else if (key == "halve_per_bad_epoch") halve_per_bad_epoch = to_b(value);
    else if (key == "freeze_embeddings") freeze_embeddings = to_b(value);
    else if (key == "grad_clip") grad_clip = to_d(value);
    else if (key == "max_answer_len") max_answer_len = to_u(value);
    else if (key == "oov_sigma") oov_sigma = to_d(value);
    else if (key == "seed") seed = to_u(value);
    else throw ConfigError("config: unknown key '" + key + "'");
  }

  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::size_t first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      c.set(line.substr(first, eq - first), line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }
};

}  // namespace jnet
