// ade — command-line surface for the drug / adverse-event extraction
// pipeline: ingest (corpus validation), train, eval and predict.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
// invariant breach.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ade/corpus.hpp"
#include "ade/log.hpp"
#include "ade/nerstage.hpp"
#include "ade/pipeline.hpp"
#include "ade/textproc.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kInvariantBreach = 3;

struct DataFlags {
  std::string pos_path;
  std::string neg_path;
  std::string synthetic;  // "N,M"
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
  cmd->add_option("--pos", flags.pos_path, "positive (ADE) corpus file");
  cmd->add_option("--neg", flags.neg_path, "negative (Non-ADE) corpus file");
  cmd->add_option("--synthetic", flags.synthetic,
                  "generate a synthetic corpus, format N_POS,N_NEG");
}

std::pair<std::size_t, std::size_t> parse_synthetic_spec(const std::string& spec) {
  std::size_t comma = spec.find(',');
  if (comma == std::string::npos) {
    throw ade::FormatError("--synthetic expects N_POS,N_NEG, got '" + spec + "'");
  }
  try {
    return {std::stoull(spec.substr(0, comma)), std::stoull(spec.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ade::FormatError("--synthetic expects N_POS,N_NEG, got '" + spec + "'");
  }
}

std::vector<ade::LabeledSentence> load_sentences(const DataFlags& flags,
                                                 std::uint64_t synthetic_seed,
                                                 std::string* provenance) {
  if (!flags.synthetic.empty()) {
    auto [n_pos, n_neg] = parse_synthetic_spec(flags.synthetic);
    ade::Corpus corpus =
        ade::generate_synthetic_corpus(n_pos, n_neg, synthetic_seed);
    if (provenance != nullptr) *provenance = corpus.provenance.front();
    return std::move(corpus.sentences);
  }
  if (flags.pos_path.empty() || flags.neg_path.empty()) {
    throw ade::DomainError("provide either --synthetic or both --pos and --neg");
  }
  ade::Corpus corpus = ade::load_corpus(flags.pos_path, flags.neg_path);
  if (provenance != nullptr) {
    *provenance = flags.pos_path + "+" + flags.neg_path;
  }
  return std::move(corpus.sentences);
}

// Flag presence is tracked through the option pointers so that a --config
// file supplies defaults and explicit flags override it.
struct ConfigFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int classifier_folds = 0;
  int qa_folds = 0;
  std::size_t relevance_epochs = 0;
  std::size_t qa_epochs = 0;
  double relevance_lr = 0.0;
  double qa_lr = 0.0;
  double label_smoothing = 0.0;
  double tau = 0.0;
  std::size_t max_answer_len = 0;
  std::string match;
  std::string pair_rule;
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t min_count = 0;
  int jobs = 0;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* classifier_folds_opt = nullptr;
  CLI::Option* qa_folds_opt = nullptr;
  CLI::Option* relevance_epochs_opt = nullptr;
  CLI::Option* qa_epochs_opt = nullptr;
  CLI::Option* relevance_lr_opt = nullptr;
  CLI::Option* qa_lr_opt = nullptr;
  CLI::Option* label_smoothing_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* max_answer_len_opt = nullptr;
  CLI::Option* match_opt = nullptr;
  CLI::Option* pair_rule_opt = nullptr;
  CLI::Option* embed_dim_opt = nullptr;
  CLI::Option* hidden_dim_opt = nullptr;
  CLI::Option* min_count_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path,
                  "JSON file supplying any subset of the flags below");
  f.seed_opt = cmd->add_option("--seed", f.seed, "master random seed");
  f.classifier_folds_opt = cmd->add_option("--classifier-folds",
                                           f.classifier_folds,
                                           "relevance ensemble fold count");
  f.qa_folds_opt = cmd->add_option("--qa-folds", f.qa_folds,
                                   "QA ensemble fold count");
  f.relevance_epochs_opt = cmd->add_option("--relevance-epochs",
                                           f.relevance_epochs,
                                           "classifier training epochs");
  f.qa_epochs_opt = cmd->add_option("--qa-epochs", f.qa_epochs,
                                    "QA training epochs");
  f.relevance_lr_opt = cmd->add_option("--relevance-lr", f.relevance_lr,
                                       "classifier Adam learning rate");
  f.qa_lr_opt = cmd->add_option("--qa-lr", f.qa_lr, "QA Adam learning rate");
  f.label_smoothing_opt = cmd->add_option("--label-smoothing",
                                          f.label_smoothing,
                                          "QA label smoothing epsilon");
  f.tau_opt = cmd->add_option("--tau", f.tau,
                              "relevance decision threshold (inclusive)");
  f.max_answer_len_opt = cmd->add_option("--max-answer-len", f.max_answer_len,
                                         "answer span length cap in tokens");
  f.match_opt = cmd->add_option("--match", f.match,
                                "span match criterion: exact|overlap|both");
  f.pair_rule_opt = cmd->add_option("--pair-rule", f.pair_rule,
                                    "multi-pair sentence rule: any|all");
  f.embed_dim_opt = cmd->add_option("--embed-dim", f.embed_dim,
                                    "encoder embedding dimension");
  f.hidden_dim_opt = cmd->add_option("--hidden-dim", f.hidden_dim,
                                     "classifier hidden dimension");
  f.min_count_opt = cmd->add_option("--min-count", f.min_count,
                                    "vocabulary frequency threshold");
  f.jobs_opt = cmd->add_option("--jobs", f.jobs,
                               "threads for fold training / eval sharding");
}

ade::PipelineConfig merge_config(const ConfigFlags& f) {
  ade::PipelineConfig config;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ade::IoError("cannot open config file: " + f.config_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    config = ade::PipelineConfig::from_json_text(text);
  }
  auto set_if = [](CLI::Option* opt, auto& target, const auto& value) {
    if (opt != nullptr && opt->count() > 0) target = value;
  };
  set_if(f.seed_opt, config.seed, f.seed);
  set_if(f.classifier_folds_opt, config.classifier_folds, f.classifier_folds);
  set_if(f.qa_folds_opt, config.qa_folds, f.qa_folds);
  set_if(f.relevance_epochs_opt, config.relevance_epochs, f.relevance_epochs);
  set_if(f.qa_epochs_opt, config.qa_epochs, f.qa_epochs);
  set_if(f.relevance_lr_opt, config.relevance_lr, f.relevance_lr);
  set_if(f.qa_lr_opt, config.qa_lr, f.qa_lr);
  set_if(f.label_smoothing_opt, config.label_smoothing, f.label_smoothing);
  set_if(f.tau_opt, config.tau, f.tau);
  set_if(f.max_answer_len_opt, config.max_answer_len, f.max_answer_len);
  if (f.match_opt != nullptr && f.match_opt->count() > 0) {
    config.match = ade::match_selection_from_string(f.match);
  }
  if (f.pair_rule_opt != nullptr && f.pair_rule_opt->count() > 0) {
    config.pair_rule = ade::pair_rule_from_string(f.pair_rule);
  }
  set_if(f.embed_dim_opt, config.embed_dim, f.embed_dim);
  set_if(f.hidden_dim_opt, config.hidden_dim, f.hidden_dim);
  set_if(f.min_count_opt, config.vocab_min_count, f.min_count);
  set_if(f.jobs_opt, config.jobs, f.jobs);
  config.validate();
  return config;
}

void write_loss_log(const std::string& path, const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) throw ade::IoError("cannot write loss log: " + path);
  char line[64];
  for (std::size_t epoch = 0; epoch < losses.size(); ++epoch) {
    std::snprintf(line, sizeof(line), "%zu\t%.17g\n", epoch + 1, losses[epoch]);
    out << line;
  }
}

int cmd_train(const DataFlags& data, const ConfigFlags& config_flags,
              const std::string& out_path, const std::string& lexicon_path,
              double test_fraction, const std::string& test_pos_out,
              const std::string& test_neg_out, const std::string& log_dir,
              const std::string& vocab_out, const std::string& lexicon_out) {
  ade::PipelineConfig config = merge_config(config_flags);

  std::string provenance;
  std::vector<ade::LabeledSentence> sentences =
      load_sentences(data, config.seed, &provenance);

  if (test_fraction > 0.0) {
    if (test_pos_out.empty() || test_neg_out.empty()) {
      throw ade::DomainError(
          "--test-fraction needs --test-pos-out and --test-neg-out");
    }
    ade::DatasetSplit split =
        ade::make_splits(sentences, test_fraction, config.seed);
    ade::write_corpus_files(split.test, test_pos_out, test_neg_out);
    ade::log_info("held out " + std::to_string(split.test.size()) +
                  " sentences to " + test_pos_out + " / " + test_neg_out);
    sentences = std::move(split.train);
  }

  std::optional<ade::DrugLexicon> lexicon_override;
  if (!lexicon_path.empty()) {
    lexicon_override = ade::load_lexicon(lexicon_path);
  }

  ade::TrainOutput output = ade::train_pipeline(
      sentences, config,
      lexicon_override.has_value() ? &*lexicon_override : nullptr);

  ade::save_bundle(output.bundle, out_path);

  std::filesystem::path log_base =
      log_dir.empty() ? std::filesystem::path(out_path).parent_path()
                      : std::filesystem::path(log_dir);
  if (!log_base.empty()) std::filesystem::create_directories(log_base);
  std::string stem = std::filesystem::path(out_path).stem().string();

  std::printf("stage\tfold\tfinal_loss\n");
  for (std::size_t i = 0; i < output.relevance_losses.size(); ++i) {
    const auto& losses = output.relevance_losses[i];
    write_loss_log((log_base / (stem + ".relevance-fold" + std::to_string(i) +
                                ".loss.tsv")).string(),
                   losses);
    std::printf("relevance\t%zu\t%.6f\n", i, losses.back());
  }
  for (std::size_t i = 0; i < output.qa_losses.size(); ++i) {
    const auto& losses = output.qa_losses[i];
    write_loss_log((log_base / (stem + ".qa-fold" + std::to_string(i) +
                                ".loss.tsv")).string(),
                   losses);
    std::printf("qa\t%zu\t%.6f\n", i, losses.back());
  }

  if (!vocab_out.empty()) ade::save_vocabulary(output.bundle.vocab, vocab_out);
  if (!lexicon_out.empty()) ade::save_lexicon(output.bundle.lexicon, lexicon_out);

  std::printf("trained on %zu sentences (%s)\n", sentences.size(),
              provenance.c_str());
  std::printf("bundle written: %s\n", out_path.c_str());
  return kOk;
}

void print_scores_line(const char* name, const ade::PrfScores& scores) {
  std::printf("%s: P=%.2f R=%.2f F1=%.2f\n", name, 100.0 * scores.precision,
              100.0 * scores.recall, 100.0 * scores.f1);
}

int cmd_eval(const DataFlags& data, const std::string& bundle_path,
             std::uint64_t seed, const std::string& match,
             const std::string& pair_rule, double tau, bool tau_set,
             const std::string& lexicon_path, const std::string& report_path,
             bool include_traces, int jobs) {
  ade::TrainedBundle bundle = ade::load_bundle(bundle_path);
  if (!match.empty()) {
    bundle.config.match = ade::match_selection_from_string(match);
  }
  if (!pair_rule.empty()) {
    bundle.config.pair_rule = ade::pair_rule_from_string(pair_rule);
  }
  if (tau_set) {
    bundle.config.tau = tau;
    bundle.relevance.tau = tau;
  }
  if (jobs > 0) bundle.config.jobs = jobs;
  if (!lexicon_path.empty()) {
    bundle.lexicon = ade::load_lexicon(lexicon_path);
  }
  bundle.config.validate();

  std::string provenance;
  std::vector<ade::LabeledSentence> sentences =
      load_sentences(data, seed, &provenance);
  bundle.config.eval_data = provenance;

  ade::RunReport report =
      ade::evaluate_end_to_end(bundle, sentences, include_traces);

  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw ade::IoError("cannot write report file: " + report_path);
    out << report.to_json_text();
  }

  if (report.exact.has_value()) print_scores_line("exact", report.exact->scores);
  if (report.overlap.has_value()) {
    print_scores_line("overlap", report.overlap->scores);
  }
  return kOk;
}

int cmd_predict(const std::string& bundle_path, const std::string& text,
                const std::string& lexicon_path) {
  ade::TrainedBundle bundle = ade::load_bundle(bundle_path);
  if (!lexicon_path.empty()) {
    bundle.lexicon = ade::load_lexicon(lexicon_path);
  }

  ade::LabeledSentence sentence;
  sentence.doc_id = "cli";
  sentence.text = text;
  ade::SentenceTrace trace = ade::run_sentence(bundle, sentence);

  if (trace.eliminated_at == ade::EliminationStage::Ner) {
    std::printf("eliminated at ner\n");
    return kOk;
  }
  if (trace.eliminated_at == ade::EliminationStage::Classifier) {
    std::printf("eliminated at classifier\n");
    return kOk;
  }
  for (const auto& answer : trace.answers) {
    std::printf("%s\t%s\t%zu,%zu\t%.6f\n", answer.mention.surface.c_str(),
                answer.prediction.answer_text.c_str(),
                answer.prediction.char_span.begin,
                answer.prediction.char_span.end, answer.prediction.score);
  }
  return kOk;
}

int cmd_ingest(const std::string& pos_path, const std::string& neg_path) {
  ade::LoadStats stats;
  ade::Corpus corpus = ade::load_corpus(pos_path, neg_path, &stats);
  ade::validate_corpus(corpus);
  std::printf("ADE unique sentences: %zu\n", stats.positives);
  std::printf("Non-ADE unique sentences: %zu\n", stats.negatives);
  std::printf("%s\n", stats.summary_line().c_str());
  return kOk;
}

int run_guarded(const std::function<int()>& command) {
  try {
    return command();
  } catch (const ade::InvariantError& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kInvariantBreach;
  } catch (const ade::ShapeMismatch& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kInvariantBreach;
  } catch (const ade::DomainError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ade::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariantBreach;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ade — cascaded drug / adverse-event extraction pipeline"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train classifier and QA folds, write a bundle");
  DataFlags train_data;
  add_data_flags(train, train_data);
  ConfigFlags train_config;
  add_config_flags(train, train_config);
  std::string train_out;
  train->add_option("--out", train_out, "bundle output path")->required();
  std::string train_lexicon;
  train->add_option("--lexicon", train_lexicon,
                    "lexicon file overriding the trained gazetteer");
  double test_fraction = 0.0;
  train->add_option("--test-fraction", test_fraction,
                    "hold out this fraction per class before training");
  std::string test_pos_out, test_neg_out;
  train->add_option("--test-pos-out", test_pos_out, "held-out positive file");
  train->add_option("--test-neg-out", test_neg_out, "held-out negative file");
  std::string log_dir;
  train->add_option("--log-dir", log_dir, "directory for per-fold loss logs");
  std::string vocab_out, lexicon_out;
  train->add_option("--vocab-out", vocab_out, "also dump the vocabulary file");
  train->add_option("--lexicon-out", lexicon_out, "also dump the lexicon file");

  // eval
  auto* eval = app.add_subcommand("eval", "run the cascade on labeled data, report metrics");
  DataFlags eval_data;
  add_data_flags(eval, eval_data);
  std::string eval_bundle;
  eval->add_option("--bundle", eval_bundle, "trained bundle path")->required();
  std::uint64_t eval_seed = 1;
  eval->add_option("--seed", eval_seed, "seed for --synthetic test data");
  std::string eval_match;
  eval->add_option("--match", eval_match, "span match criterion: exact|overlap|both");
  std::string eval_pair_rule;
  eval->add_option("--pair-rule", eval_pair_rule, "multi-pair sentence rule: any|all");
  double eval_tau = 0.0;
  auto* eval_tau_opt = eval->add_option("--tau", eval_tau, "override decision threshold");
  std::string eval_lexicon;
  eval->add_option("--lexicon", eval_lexicon, "lexicon file overriding the bundle's");
  std::string report_path;
  eval->add_option("--report", report_path, "write the JSON run report here");
  bool include_traces = false;
  eval->add_flag("--traces", include_traces, "embed per-sentence traces in the report");
  int eval_jobs = 0;
  eval->add_option("--jobs", eval_jobs, "threads for evaluation sharding");

  // predict
  auto* predict = app.add_subcommand("predict", "run one sentence through the cascade");
  std::string predict_bundle;
  predict->add_option("--bundle", predict_bundle, "trained bundle path")->required();
  std::string predict_text;
  predict->add_option("--text", predict_text, "sentence to analyze");
  std::string predict_lexicon;
  predict->add_option("--lexicon", predict_lexicon, "lexicon file overriding the bundle's");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate corpus files and print counts");
  std::string ingest_pos, ingest_neg;
  ingest->add_option("--pos", ingest_pos, "positive (ADE) corpus file")->required();
  ingest->add_option("--neg", ingest_neg, "negative (Non-ADE) corpus file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  if (train->parsed()) {
    return run_guarded([&] {
      return cmd_train(train_data, train_config, train_out, train_lexicon,
                       test_fraction, test_pos_out, test_neg_out, log_dir,
                       vocab_out, lexicon_out);
    });
  }
  if (eval->parsed()) {
    return run_guarded([&] {
      return cmd_eval(eval_data, eval_bundle, eval_seed, eval_match,
                      eval_pair_rule, eval_tau, eval_tau_opt->count() > 0,
                      eval_lexicon, report_path, include_traces, eval_jobs);
    });
  }
  if (predict->parsed()) {
    if (predict_text.empty()) {
      std::cerr << "usage error: --text must be a non-empty sentence\n";
      return kUsageError;
    }
    return run_guarded(
        [&] { return cmd_predict(predict_bundle, predict_text, predict_lexicon); });
  }
  if (ingest->parsed()) {
    return run_guarded([&] { return cmd_ingest(ingest_pos, ingest_neg); });
  }
  return kUsageError;
}
