// Command-line entry point: training, evaluation, report analysis, gradient
// verification, and synthetic-corpus generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jnet/jnet.hpp"

namespace {

jnet::Config make_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  jnet::Config cfg;
  if (!config_path.empty()) cfg = jnet::Config::load(config_path);
  for (const auto& kv : overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw jnet::ConfigError("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& data_path, const std::string& dev_path,
              const std::string& parses_path, const std::string& embeddings_path,
              const std::string& out_path) {
  jnet::Config cfg = make_config(config_path, overrides);
  jnet::LoadStats stats;
  auto train_set = jnet::load_squad(data_path, true, &stats);
  std::vector<jnet::TokenizedExample> dev_set;
  if (!dev_path.empty()) {
    dev_set = jnet::load_squad(dev_path, false);
  } else {
    // hold out the last tenth when no dev file is given
    const std::size_t n_dev = std::max<std::size_t>(1, train_set.size() / 10);
    dev_set.assign(train_set.end() - n_dev, train_set.end());
    train_set.resize(train_set.size() - n_dev);
  }
  if (!parses_path.empty()) {
    auto parses = jnet::load_parses(parses_path);
    jnet::attach_parses(train_set, parses, &stats);
    jnet::attach_parses(dev_set, parses, &stats);
  }
  if (stats.dropped_unaligned)
    std::fprintf(stderr, "dropped %zu unalignable training examples\n", stats.dropped_unaligned);
  if (stats.parse_rejected)
    std::fprintf(stderr, "rejected %zu parse trees (right-branching fallback)\n",
                 stats.parse_rejected);

  auto all = train_set;
  all.insert(all.end(), dev_set.begin(), dev_set.end());
  jnet::EmbeddingTable table = jnet::load_embeddings(
      embeddings_path, jnet::build_vocab(all), cfg.word_dim, cfg.seed, cfg.oov_sigma);
  jnet::Model model(cfg, std::move(table));
  jnet::AdamState adam;
  jnet::TrainResult result =
      jnet::train(model, train_set, dev_set, adam, [](const jnet::EpochStats& st) {
        std::printf("epoch %zu  loss %.17g  dev_em %.6f  dev_f1 %.6f  lr %.10g%s\n", st.epoch,
                    st.train_loss, st.dev_em, st.dev_f1, st.lr, st.bad ? "  (bad)" : "");
        std::fflush(stdout);
      });
  jnet::CheckpointMeta meta{result.best_epoch, result.best_em, result.best_f1};
  jnet::save_checkpoint(out_path, model, adam, meta);
  std::printf("best epoch %zu  dev_em %.6f  dev_f1 %.6f  -> %s\n", result.best_epoch,
              result.best_em, result.best_f1, out_path.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& parses_path, const std::string& report_path) {
  jnet::Model model = jnet::load_checkpoint(ckpt_path);
  auto data = jnet::load_squad(data_path, false);
  if (!parses_path.empty()) {
    auto parses = jnet::load_parses(parses_path);
    jnet::attach_parses(data, parses);
  }
  jnet::EvalReport report = jnet::evaluate(model, data);
  std::fputs(jnet::report_table(report).c_str(), stdout);
  if (!report_path.empty()) {
    std::ofstream os(report_path);
    if (!os) throw jnet::DataError("cannot write report: " + report_path);
    os << jnet::report_to_json(report).dump(2) << "\n";
  }
  return 0;
}

int cmd_analyze(const std::string& report_path) {
  std::ifstream is(report_path);
  if (!is) throw jnet::DataError("cannot open report: " + report_path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw jnet::DataError("malformed report JSON in " + report_path + ": " + e.what());
  }
  std::vector<jnet::ExampleScore> scores;
  for (const auto& e : j.at("examples")) {
    jnet::ExampleScore s;
    s.qid = e.at("qid").get<std::string>();
    s.prediction = e.at("prediction").get<std::string>();
    s.best_gold = e.at("best_gold").get<std::string>();
    s.em = e.at("em").get<int>();
    s.f1 = e.at("f1").get<double>();
    const std::string type = e.at("type").get<std::string>();
    const auto& names = jnet::question_type_names();
    s.type_id = 10;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == type) s.type_id = i;
    scores.push_back(std::move(s));
  }
  std::fputs(jnet::report_table(jnet::analyze(std::move(scores))).c_str(), stdout);
  return 0;
}

int cmd_gradcheck(const std::string& module) {
  auto results = jnet::gradcheck_suite();
  bool ok = true;
  bool matched = false;
  for (const auto& r : results) {
    if (!module.empty() && r.name != module) continue;
    matched = true;
    const bool pass = r.max_rel_err < 1e-5;
    ok = ok && pass;
    std::printf("%-22s max_rel_err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                pass ? "ok" : "FAIL");
  }
  if (!module.empty() && !matched)
    throw jnet::UsageError("gradcheck: unknown module '" + module + "'");
  return ok ? 0 : 2;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::size_t n_train,
              std::size_t n_dev) {
  jnet::SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.n_train = n_train;
  cfg.n_dev = n_dev;
  auto [train, dev] = jnet::gen_synthetic(cfg);
  std::filesystem::create_directories(out_dir);
  for (auto [name, j] : {std::pair<std::string, nlohmann::json*>{"train.json", &train},
                         {"dev.json", &dev}}) {
    const std::string path = out_dir + "/" + name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw jnet::DataError("cannot write " + path);
    os << j->dump(2) << "\n";
  }
  std::printf("wrote %zu train / %zu dev instances to %s\n", n_train, n_dev, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jnet: span-extraction reading comprehension at desk scale"};
  app.require_subcommand(1);

  std::string config_path, data_path, dev_path, parses_path, embeddings_path, out_path;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "config file (key=value lines)");
  train->add_option("--data", data_path, "SQuAD-format training data")->required();
  train->add_option("--dev", dev_path, "SQuAD-format dev data (default: 10% holdout)");
  train->add_option("--parses", parses_path, "question parse file (qid<TAB>s-expression)");
  train->add_option("--embeddings", embeddings_path, "pre-trained embedding text file");
  train->add_option("--out", out_path, "output checkpoint path")->required();
  train->add_option("--set", overrides, "override a config key, e.g. --set variant=+ET");

  std::string ckpt_path, report_path;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval->add_option("--data", data_path, "SQuAD-format data")->required();
  eval->add_option("--parses", parses_path, "question parse file");
  eval->add_option("--report", report_path, "write a JSON report here");

  auto* analyze = app.add_subcommand("analyze", "type breakdown + F1 composition of a report");
  analyze->add_option("--report", report_path, "report JSON from eval")->required();

  std::string module;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--module", module, "run a single layer check");

  std::string out_dir;
  std::uint64_t seed = 7;
  std::size_t n_train = 500, n_dev = 100;
  auto* synth = app.add_subcommand("synth-data", "emit the synthetic corpus");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--train", n_train, "training instances");
  synth->add_option("--dev", n_dev, "dev instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (train->parsed())
      return cmd_train(config_path, overrides, data_path, dev_path, parses_path,
                       embeddings_path, out_path);
    if (eval->parsed()) return cmd_eval(ckpt_path, data_path, parses_path, report_path);
    if (analyze->parsed()) return cmd_analyze(report_path);
    if (gradcheck->parsed()) return cmd_gradcheck(module);
    if (synth->parsed()) return cmd_synth(out_dir, seed, n_train, n_dev);
  } catch (const jnet::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const jnet::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const jnet::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
