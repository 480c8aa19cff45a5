#include "cloze/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cloze/analysis.hpp"
#include "cloze/corpus.hpp"
#include "cloze/ensemble.hpp"
#include "cloze/model.hpp"
#include "cloze/scorers.hpp"
#include "cloze/tokenizer.hpp"
#include "cloze/training.hpp"

namespace cloze::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::vector<std::string> datasets;
  std::string dataset;
  std::string vocab_path;
  std::string model_path;
  std::string init_model_path;
  std::string scores_path;
  std::vector<std::string> inputs;
  std::string scorer = "mlm";
  std::string counts_from;
  int max_len = kDefaultMaxLen;
  bool no_article = false;
  std::optional<int> top_k;
  std::vector<double> weights;
  double tf = kDefaultThresholdFactor;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  std::string log_path;

  // stats / synth / build-vocab
  int bucket = 50;
  int n_examples = 1000;
  int templates = 0;
  double holdout = 0.0;
  std::string holdout_out;
  int cap = 30000;

  // train
  int epochs = 3;
  int batch_size = 16;
  double lr = 5e-5;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
};

// Writes through a sibling temp file so a failure never leaves a partial
// artifact at `path`.
void write_output(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("failed writing " + path);
  }
  fs::rename(tmp, target);
}

void emit(const RunConfig& rc, const std::string& content, std::ostream& out) {
  if (rc.out.empty()) out << content;
  else write_output(rc.out, content);
}

std::vector<ClozeExample> load_all(const std::vector<std::string>& paths) {
  std::vector<ClozeExample> all;
  for (const auto& p : paths) {
    auto part = load_dataset(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

std::string histogram_json(const LengthHistogram& h, std::size_t n) {
  nlohmann::ordered_json j;
  j["n_examples"] = n;
  j["bucket_width"] = h.bucket_width;
  j["mean"] = h.mean;
  j["max"] = h.max;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [start, c] : h.counts) counts[std::to_string(start)] = c;
  j["counts"] = counts;
  return j.dump(2) + "\n";
}

int cmd_stats(const RunConfig& rc, std::ostream& out) {
  const auto data = load_dataset(rc.dataset);
  emit(rc, histogram_json(article_stats(data, rc.bucket), data.size()), out);
  return kExitOk;
}

int cmd_synth(const RunConfig& rc, std::ostream& out) {
  auto config = default_synthetic_config(rc.seed, rc.n_examples);
  if (rc.templates > 0) config.template_count = rc.templates;
  const auto data = generate_synthetic(config);
  if (rc.holdout > 0.0) {
    if (rc.holdout_out.empty()) throw ValidationError("--holdout needs --holdout-out");
    auto [train, held] = split_dataset(data, 1.0 - rc.holdout);
    const std::string train_text = to_jsonl(train);
    const std::string held_text = to_jsonl(held);
    write_output(rc.out, train_text);
    write_output(rc.holdout_out, held_text);
    out << "wrote " << train.size() << " examples to " << rc.out << " and " << held.size()
        << " to " << rc.holdout_out << "\n";
  } else {
    write_output(rc.out, to_jsonl(data));
    out << "wrote " << data.size() << " examples to " << rc.out << "\n";
  }
  return kExitOk;
}

int cmd_build_vocab(const RunConfig& rc, std::ostream& out) {
  std::vector<std::string> corpus;
  for (const auto& ex : load_all(rc.datasets)) {
    corpus.push_back(ex.article);
    corpus.push_back(ex.question);
    for (const auto& o : ex.options) corpus.push_back(o);
  }
  const auto vocab = Vocab::build(corpus, rc.cap);
  write_output(rc.out, vocab.to_lines());
  out << "vocabulary of " << vocab.size() << " tokens written to " << rc.out << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto data = load_dataset(rc.dataset);
  const auto vocab = Vocab::load(rc.vocab_path);

  TinyLm model;
  if (!rc.init_model_path.empty()) {
    model = TinyLm::load(rc.init_model_path);
    if (model.config().vocab_size != vocab.size()) {
      throw ValidationError("initial model vocabulary size does not match --vocab");
    }
  } else {
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.d_model = rc.d_model;
    mc.n_layers = rc.n_layers;
    mc.n_heads = rc.n_heads;
    mc.d_ff = rc.d_ff;
    mc.max_len = rc.max_len;
    mc.seed = rc.seed;
    model = TinyLm::init(mc);
  }

  std::vector<MlmExample> train_set;
  for (const auto& ex : data) {
    if (!ex.label) throw ValidationError("training example " + ex.id + " has no label");
    train_set.emplace_back(
        encode_example(ex, vocab, EncodeMode::mlm(), rc.max_len, !rc.no_article),
        option_token_id(ex.options[static_cast<std::size_t>(*ex.label)], vocab));
  }

  TrainConfig tc;
  tc.learning_rate = rc.lr;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.seed = rc.seed;
  auto result = train_mlm(std::move(model), train_set, tc, [&](int epoch, const TinyLm&, double loss) {
    out << "epoch " << epoch + 1 << " mean loss " << std::setprecision(6) << loss << "\n";
    return true;
  });

  if (!rc.log_path.empty()) {
    nlohmann::ordered_json log;
    log["dataset"] = rc.dataset;
    log["n_examples"] = data.size();
    log["learning_rate"] = tc.learning_rate;
    log["default_learning_rate"] = TrainConfig{}.learning_rate;
    log["epochs"] = tc.epochs;
    log["batch_size"] = tc.batch_size;
    log["seed"] = tc.seed;
    log["max_len"] = rc.max_len;
    log["use_article"] = !rc.no_article;
    const auto& mc = result.model.config();
    log["model"] = {{"vocab_size", mc.vocab_size}, {"d_model", mc.d_model},
                    {"n_layers", mc.n_layers},     {"n_heads", mc.n_heads},
                    {"d_ff", mc.d_ff},             {"max_len", mc.max_len}};
    log["loss_trace"] = result.loss_trace;
    write_output(rc.log_path, log.dump(2) + "\n");
  }
  write_output(rc.out, result.model.serialize());
  out << "model written to " << rc.out << "\n";
  return kExitOk;
}

int cmd_score(const RunConfig& rc, std::ostream& out) {
  const auto data = load_dataset(rc.dataset);
  ScoreTable table;
  if (rc.scorer == "unigram") {
    const auto counts =
        count_article_words(rc.counts_from.empty() ? data : load_dataset(rc.counts_from));
    for (const auto& ex : data) table.add(score_unigram(counts, ex));
  } else {
    if (rc.vocab_path.empty() || rc.model_path.empty()) {
      throw ValidationError("scorer '" + rc.scorer + "' needs --vocab and --model");
    }
    const auto vocab = Vocab::load(rc.vocab_path);
    const auto model = TinyLm::load(rc.model_path);
    if (model.config().vocab_size != vocab.size()) {
      throw ValidationError("model vocabulary size does not match --vocab");
    }
    for (const auto& ex : data) {
      if (rc.scorer == "mlm") {
        table.add(score_mlm(model, vocab, ex, {rc.max_len, !rc.no_article, rc.top_k}));
      } else if (rc.scorer == "mcq") {
        table.add(score_mcq(model, vocab, ex, rc.max_len));
      } else {
        table.add(score_cosine(model, vocab, ex, rc.max_len));
      }
    }
  }
  emit(rc, to_jsonl(table), out);
  return kExitOk;
}

int cmd_ensemble(const RunConfig& rc, std::ostream& out) {
  EnsembleSpec spec;
  for (std::size_t i = 0; i < rc.inputs.size(); ++i) {
    double w = 1.0;
    if (!rc.weights.empty()) {
      if (rc.weights.size() != rc.inputs.size()) {
        throw ValidationError("--weights needs one value per --in");
      }
      w = rc.weights[i];
    }
    spec.members.push_back({load_external_scores(rc.inputs[i]), w});
  }
  emit(rc, to_jsonl(combine(spec)), out);
  return kExitOk;
}

std::vector<Prediction> load_predictions(const RunConfig& rc) {
  const auto table = load_external_scores(rc.scores_path);
  const auto data = load_dataset(rc.dataset);
  return predict_all(table, data);
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  if (!(rc.tf > 1.0)) throw ValidationError("--tf must be > 1");
  const auto preds = load_predictions(rc);
  if (rc.format == "csv") {
    emit(rc, predictions_csv(preds, rc.tf), out);
  } else {
    emit(rc, report_json(summarize(preds, rc.tf)), out);
  }
  return kExitOk;
}

int cmd_analyze(const RunConfig& rc, std::ostream& out) {
  if (!(rc.tf > 1.0)) throw ValidationError("--tf must be > 1");
  const auto preds = load_predictions(rc);
  std::vector<Prediction> labeled;
  for (const auto& p : preds) {
    if (p.gold_index) labeled.push_back(p);
  }
  const std::string csv = predictions_csv(preds, rc.tf);

  out << "examples: " << preds.size() << " (" << labeled.size() << " labeled)\n";
  if (!labeled.empty()) {
    const auto r = summarize(labeled, rc.tf);
    out << std::fixed << std::setprecision(4);
    out << "accuracy: " << r.accuracy << "\n";
    out << "threshold factor: " << r.tf << "\n";
    for (auto c : {ConfidenceCategory::kWrongConfident, ConfidenceCategory::kWrongConfused,
                   ConfidenceCategory::kCorrectConfident, ConfidenceCategory::kCorrectConfused}) {
      out << "  " << to_string(c) << ": " << r.count(c) << "\n";
    }
    out << "confident predictions: " << r.confident_fraction << "\n";
    out << "wrong predictions made confidently: " << r.wrong_confident_fraction << "\n";
  }
  if (!rc.out.empty()) write_output(rc.out, csv);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Cloze-style reading comprehension toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto add_seed = [&](CLI::App* sub) {
    return sub->add_option("--seed", rc.seed, "Random seed (default: $CLOZE_SEED or 0)");
  };
  std::vector<CLI::Option*> seed_opts;

  auto* stats = app.add_subcommand("stats", "Article length histogram of a dataset");
  stats->add_option("--dataset", rc.dataset, "Dataset JSONL")->required();
  stats->add_option("--bucket", rc.bucket, "Bucket width in tokens")->check(CLI::PositiveNumber);
  stats->add_option("--out", rc.out, "Output JSON (default: stdout)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cloze corpus");
  synth->add_option("--n", rc.n_examples, "Number of examples");
  synth->add_option("--templates", rc.templates, "Number of fact templates to use");
  synth->add_option("--out", rc.out, "Output JSONL")->required();
  synth->add_option("--holdout", rc.holdout, "Fraction written to --holdout-out")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--holdout-out", rc.holdout_out, "Held-out JSONL");
  seed_opts.push_back(add_seed(synth));

  auto* vocab = app.add_subcommand("build-vocab", "Build a word-level vocabulary");
  vocab->add_option("--dataset", rc.datasets, "Dataset JSONL (repeatable)")->required();
  vocab->add_option("--cap", rc.cap, "Maximum vocabulary size");
  vocab->add_option("--out", rc.out, "Output vocabulary file")->required();

  auto* train = app.add_subcommand("train", "Fine-tune the tiny MLM on labeled examples");
  train->add_option("--dataset", rc.dataset, "Training JSONL")->required();
  train->add_option("--vocab", rc.vocab_path, "Vocabulary file")->required();
  train->add_option("--out", rc.out, "Output checkpoint")->required();
  train->add_option("--init", rc.init_model_path, "Start from this checkpoint");
  train->add_option("--epochs", rc.epochs, "Epochs");
  train->add_option("--batch-size", rc.batch_size, "Batch size");
  train->add_option("--lr", rc.lr, "Adam learning rate");
  train->add_option("--max-len", rc.max_len, "Maximum sequence length");
  train->add_flag("--no-article", rc.no_article, "Train on question tokens only");
  train->add_option("--d-model", rc.d_model, "Model width");
  train->add_option("--layers", rc.n_layers, "Encoder layers");
  train->add_option("--heads", rc.n_heads, "Attention heads");
  train->add_option("--d-ff", rc.d_ff, "Feed-forward width");
  train->add_option("--log", rc.log_path, "Write run config and loss trace JSON here");
  seed_opts.push_back(add_seed(train));

  auto* score = app.add_subcommand("score", "Score every example's five options");
  score->add_option("--dataset", rc.dataset, "Dataset JSONL")->required();
  score->add_option("--scorer", rc.scorer, "mlm | mcq | cosine | unigram")
      ->check(CLI::IsMember({"mlm", "mcq", "cosine", "unigram"}));
  score->add_option("--vocab", rc.vocab_path, "Vocabulary file");
  score->add_option("--model", rc.model_path, "Model checkpoint");
  score->add_option("--max-len", rc.max_len, "Maximum sequence length");
  score->add_flag("--no-article", rc.no_article, "Question tokens only (mlm)");
  score->add_option("--top-k", rc.top_k, "Keep the k most question-like sentences (mlm)")
      ->check(CLI::PositiveNumber);
  score->add_option("--counts-from", rc.counts_from, "Word-count corpus for unigram");
  score->add_option("--out", rc.out, "Output score JSONL (default: stdout)");

  auto* ens = app.add_subcommand("ensemble", "Weighted average of score files");
  ens->add_option("--in", rc.inputs, "Score JSONL (repeat, at least 2)")->required();
  ens->add_option("--weights", rc.weights, "Comma-separated weights")->delimiter(',');
  ens->add_option("--out", rc.out, "Output score JSONL (default: stdout)");

  auto* eval = app.add_subcommand("eval", "Accuracy and confidence report");
  eval->add_option("--scores", rc.scores_path, "Score JSONL")->required();
  eval->add_option("--dataset", rc.dataset, "Labeled dataset JSONL")->required();
  eval->add_option("--tf", rc.tf, "Threshold factor");
  eval->add_option("--format", rc.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  eval->add_option("--out", rc.out, "Output file (default: stdout)");

  auto* analyze = app.add_subcommand("analyze", "Per-example confidence breakdown");
  analyze->add_option("--scores", rc.scores_path, "Score JSONL")->required();
  analyze->add_option("--dataset", rc.dataset, "Dataset JSONL")->required();
  analyze->add_option("--tf", rc.tf, "Threshold factor");
  analyze->add_option("--out", rc.out, "Per-example CSV");

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  bool seed_given = false;
  for (auto* o : seed_opts) seed_given = seed_given || o->count() > 0;
  if (!seed_given) {
    if (const char* env = std::getenv(kSeedEnvVar)) {
      try {
        rc.seed = std::stoull(env);
      } catch (const std::exception&) {
        err << "error: " << kSeedEnvVar << " is not an unsigned integer\n";
        return kExitUsage;
      }
    }
  }

  try {
    if (*stats) return cmd_stats(rc, out);
    if (*synth) return cmd_synth(rc, out);
    if (*vocab) return cmd_build_vocab(rc, out);
    if (*train) return cmd_train(rc, out);
    if (*score) return cmd_score(rc, out);
    if (*ens) return cmd_ensemble(rc, out);
    if (*eval) return cmd_eval(rc, out);
    if (*analyze) return cmd_analyze(rc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace cloze::cli
