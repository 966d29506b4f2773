#include "ade/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ade/log.hpp"

namespace ade {

using nlohmann::json;

namespace {

std::string stage_tag(const char* stage, const std::exception& e) {
  return std::string("stage ") + stage + ": " + e.what();
}

// Rethrows known error types with the stage tag prepended, preserving type.
template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SingleClassFold& e) {
    throw SingleClassFold(stage_tag(stage, e));
  } catch (const EmptyFold& e) {
    throw EmptyFold(stage_tag(stage, e));
  } catch (const GoldSpanUnmappable& e) {
    throw GoldSpanUnmappable(stage_tag(stage, e));
  } catch (const KTooLarge& e) {
    throw KTooLarge(stage_tag(stage, e));
  } catch (const KTooSmall& e) {
    throw KTooSmall(stage_tag(stage, e));
  } catch (const EmptyLexicon& e) {
    throw EmptyLexicon(stage_tag(stage, e));
  } catch (const NonFiniteGradient& e) {
    throw NonFiniteGradient(stage_tag(stage, e));
  } catch (const InvariantError& e) {
    throw InvariantError(stage_tag(stage, e));
  } catch (const Error& e) {
    throw Error(stage_tag(stage, e));
  }
}

// Runs tasks 0..count-1 across up to `jobs` threads. Each task writes only
// its own slot, so results are identical to the sequential order.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& task) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& thread : threads) thread.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void PipelineConfig::validate() const {
  if (classifier_folds < 1) throw DomainError("classifier_folds must be >= 1");
  if (qa_folds < 1) throw DomainError("qa_folds must be >= 1");
  if (relevance_epochs == 0 || qa_epochs == 0) {
    throw DomainError("epoch counts must be >= 1");
  }
  if (!(relevance_lr > 0.0) || !(qa_lr > 0.0)) {
    throw DomainError("learning rates must be positive");
  }
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw DomainError("label_smoothing must lie in [0, 1)");
  }
  if (tau < 0.0 || tau > 1.0) throw DomainError("tau must lie in [0, 1]");
  if (max_answer_len == 0) throw DomainError("max_answer_len must be >= 1");
  if (embed_dim == 0 || hidden_dim == 0) {
    throw DomainError("encoder dimensions must be >= 1");
  }
  if (vocab_min_count == 0) throw DomainError("vocab_min_count must be >= 1");
  if (jobs < 1) throw DomainError("jobs must be >= 1");
}

std::string to_string(MatchSelection selection) {
  switch (selection) {
    case MatchSelection::Exact: return "exact";
    case MatchSelection::Overlap: return "overlap";
    case MatchSelection::Both: return "both";
  }
  throw InvariantError("unknown match selection");
}

MatchSelection match_selection_from_string(const std::string& text) {
  if (text == "exact") return MatchSelection::Exact;
  if (text == "overlap") return MatchSelection::Overlap;
  if (text == "both") return MatchSelection::Both;
  throw FormatError("match must be exact, overlap or both, got '" + text + "'");
}

std::string to_string(PairRule rule) {
  return rule == PairRule::AnyPair ? "any" : "all";
}

PairRule pair_rule_from_string(const std::string& text) {
  if (text == "any") return PairRule::AnyPair;
  if (text == "all") return PairRule::AllPairs;
  throw FormatError("pair rule must be any or all, got '" + text + "'");
}

namespace {

json config_to_json(const PipelineConfig& config) {
  return json{{"seed", config.seed},
              {"classifier_folds", config.classifier_folds},
              {"qa_folds", config.qa_folds},
              {"relevance_epochs", config.relevance_epochs},
              {"qa_epochs", config.qa_epochs},
              {"relevance_lr", config.relevance_lr},
              {"qa_lr", config.qa_lr},
              {"label_smoothing", config.label_smoothing},
              {"tau", config.tau},
              {"max_answer_len", config.max_answer_len},
              {"match", to_string(config.match)},
              {"pair_rule", to_string(config.pair_rule)},
              {"embed_dim", config.embed_dim},
              {"hidden_dim", config.hidden_dim},
              {"vocab_min_count", config.vocab_min_count},
              {"jobs", config.jobs},
              {"eval_data", config.eval_data}};
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig config;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") config.seed = value.get<std::uint64_t>();
    else if (key == "classifier_folds") config.classifier_folds = value.get<int>();
    else if (key == "qa_folds") config.qa_folds = value.get<int>();
    else if (key == "relevance_epochs") config.relevance_epochs = value.get<std::size_t>();
    else if (key == "qa_epochs") config.qa_epochs = value.get<std::size_t>();
    else if (key == "relevance_lr") config.relevance_lr = value.get<double>();
    else if (key == "qa_lr") config.qa_lr = value.get<double>();
    else if (key == "label_smoothing") config.label_smoothing = value.get<double>();
    else if (key == "tau") config.tau = value.get<double>();
    else if (key == "max_answer_len") config.max_answer_len = value.get<std::size_t>();
    else if (key == "match") config.match = match_selection_from_string(value.get<std::string>());
    else if (key == "pair_rule") config.pair_rule = pair_rule_from_string(value.get<std::string>());
    else if (key == "embed_dim") config.embed_dim = value.get<std::size_t>();
    else if (key == "hidden_dim") config.hidden_dim = value.get<std::size_t>();
    else if (key == "vocab_min_count") config.vocab_min_count = value.get<std::size_t>();
    else if (key == "jobs") config.jobs = value.get<int>();
    else if (key == "eval_data") config.eval_data = value.get<std::string>();
    else throw FormatError("unknown config key: " + key);
  }
  return config;
}

}  // namespace

std::string PipelineConfig::to_json_text(int indent) const {
  return config_to_json(*this).dump(indent);
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config JSON parse failure: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config JSON field failure: ") + e.what());
  }
}

TrainOutput train_pipeline(const std::vector<LabeledSentence>& train_sentences,
                           const PipelineConfig& config,
                           const DrugLexicon* lexicon_override) {
  config.validate();

  bool has_pos = false;
  bool has_neg = false;
  for (const auto& sentence : train_sentences) {
    (sentence.label == Label::Positive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw SingleClassFold("stage relevance: training corpus holds a single class");
  }

  TrainOutput output;
  output.bundle.config = config;
  output.bundle.vocab = build_vocab(train_sentences, config.vocab_min_count);
  output.bundle.lexicon =
      lexicon_override != nullptr
          ? *lexicon_override
          : with_stage("ner", [&] { return build_lexicon(train_sentences); });
  const Vocabulary& vocab = output.bundle.vocab;

  // Stage 2: relevance classifier, one model per fold.
  {
    std::vector<RelevanceExample> examples =
        make_relevance_examples(train_sentences, vocab);
    std::vector<int> labels(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) labels[i] = examples[i].label;
    FoldAssignment folds = with_stage("relevance", [&] {
      return stratified_kfold(labels, config.classifier_folds, config.seed);
    });

    RelevanceTrainConfig fold_config;
    fold_config.epochs = config.relevance_epochs;
    fold_config.lr = config.relevance_lr;
    fold_config.embed_dim = config.embed_dim;
    fold_config.hidden_dim = config.hidden_dim;

    const std::size_t k = static_cast<std::size_t>(config.classifier_folds);
    std::vector<std::optional<RelevanceTrainResult>> results(k);
    parallel_for(k, config.jobs, [&](std::size_t fold) {
      std::vector<RelevanceExample> train_fold;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (folds.fold_of[i] != static_cast<int>(fold)) {
          train_fold.push_back(examples[i]);
        }
      }
      results[fold] = with_stage("relevance", [&] {
        return train_relevance_fold(train_fold, fold_config, vocab.size(),
                                    config.seed + fold);
      });
    });
    output.bundle.relevance.tau = config.tau;
    for (auto& result : results) {
      output.relevance_losses.push_back(std::move(result->epoch_losses));
      output.bundle.relevance.models.push_back(std::move(result->model));
    }
  }

  // Stage 3: extractive QA over the positive sentences, one example per pair.
  {
    std::vector<QaSequence> examples;
    std::size_t unmappable = 0;
    for (const auto& sentence : train_sentences) {
      for (const auto& pair : sentence.pairs) {
        DrugMention question{pair.drug_surface, pair.drug_sent_span, "gold"};
        try {
          examples.push_back(
              build_qa_sequence(question, sentence, vocab, &pair));
        } catch (const GoldSpanUnmappable& e) {
          ++unmappable;
          log_debug(std::string("skipping unmappable gold pair: ") + e.what());
        }
      }
    }
    if (unmappable > 0) {
      log_info("qa stage skipped " + std::to_string(unmappable) +
               " gold pairs with unmappable spans");
    }
    if (examples.empty()) {
      throw EmptyFold("stage qa: no trainable QA examples");
    }
    std::vector<int> labels(examples.size(), 0);
    FoldAssignment folds = with_stage("qa", [&] {
      return stratified_kfold(labels, config.qa_folds, config.seed);
    });

    QaTrainConfig fold_config;
    fold_config.epochs = config.qa_epochs;
    fold_config.lr = config.qa_lr;
    fold_config.embed_dim = config.embed_dim;
    fold_config.label_smoothing = config.label_smoothing;

    const std::size_t k = static_cast<std::size_t>(config.qa_folds);
    std::vector<std::optional<QaTrainResult>> results(k);
    parallel_for(k, config.jobs, [&](std::size_t fold) {
      std::vector<QaSequence> train_fold;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (folds.fold_of[i] != static_cast<int>(fold)) {
          train_fold.push_back(examples[i]);
        }
      }
      results[fold] = with_stage("qa", [&] {
        return train_qa_fold(train_fold, fold_config, vocab.size(),
                             config.seed + fold);
      });
    });
    for (auto& result : results) {
      output.qa_losses.push_back(std::move(result->epoch_losses));
      output.bundle.qa.models.push_back(std::move(result->model));
    }
  }

  return output;
}

PipelineRuntime::PipelineRuntime(const TrainedBundle& bundle)
    : bundle_(bundle), recognizer_(bundle.lexicon) {}

SentenceTrace PipelineRuntime::run(const LabeledSentence& sentence) const {
  SentenceTrace trace;
  trace.sentence_id = sentence.doc_id;

  trace.mentions = recognizer_.recognize(sentence.text);
  if (trace.mentions.empty()) {
    trace.eliminated_at = EliminationStage::Ner;
    return trace;
  }

  std::vector<int> ids = encode(tokenize(sentence.text), bundle_.vocab);
  trace.relevance_probability = relevance_prob(bundle_.relevance, ids);
  if (!classify_relevant(*trace.relevance_probability, bundle_.config.tau)) {
    trace.eliminated_at = EliminationStage::Classifier;
    return trace;
  }

  for (const auto& mention : trace.mentions) {
    QaSequence seq = build_qa_sequence(mention, sentence, bundle_.vocab, nullptr);
    std::vector<SpanDistribution> distributions;
    distributions.reserve(bundle_.qa.models.size());
    for (const auto& model : bundle_.qa.models) {
      distributions.push_back(model.forward(seq));
    }
    SpanDistribution combined = ensemble_distributions(distributions);
    SpanPrediction prediction =
        decode_span(combined, bundle_.config.max_answer_len);
    extract_answer_text(sentence.text, prediction, seq);
    trace.answers.push_back({mention, std::move(prediction)});
  }
  return trace;
}

SentenceTrace run_sentence(const TrainedBundle& bundle,
                           const LabeledSentence& sentence) {
  return PipelineRuntime(bundle).run(sentence);
}

namespace {

bool positive_answer_correct(const LabeledSentence& sentence,
                             const SentenceTrace& trace,
                             MatchCriterion criterion, PairRule rule) {
  std::map<std::string, std::vector<CharSpan>> gold_by_drug;
  for (const auto& pair : sentence.pairs) {
    gold_by_drug[lowercase(pair.drug_surface)].push_back(pair.ae_sent_span);
  }
  std::map<std::string, bool> matched;
  for (const auto& answer : trace.answers) {
    auto it = gold_by_drug.find(lowercase(answer.mention.surface));
    if (it == gold_by_drug.end()) continue;
    bool& slot = matched[it->first];
    slot = slot || span_match(answer.prediction.char_span, it->second, criterion);
  }
  if (rule == PairRule::AnyPair) {
    for (const auto& [drug, ok] : matched) {
      if (ok) return true;
    }
    return false;
  }
  // AllPairs: every annotated drug needs a matching answer.
  for (const auto& [drug, spans] : gold_by_drug) {
    auto it = matched.find(drug);
    if (it == matched.end() || !it->second) return false;
  }
  return true;
}

json prf_to_json(const PrfScores& scores) {
  return json{{"p", scores.precision}, {"r", scores.recall}, {"f1", scores.f1}};
}

json tally_to_json(const CascadeTally& tally) {
  json out = json::object();
  for (std::size_t i = 0; i < kOutcomeCategoryCount; ++i) {
    out[std::string(outcome_category_name(static_cast<OutcomeCategory>(i)))] =
        tally.counts[i];
  }
  return out;
}

const char* elimination_name(EliminationStage stage) {
  switch (stage) {
    case EliminationStage::None: return "none";
    case EliminationStage::Ner: return "ner";
    case EliminationStage::Classifier: return "classifier";
  }
  return "none";
}

json trace_to_json(const SentenceTrace& trace) {
  json mentions = json::array();
  for (const auto& mention : trace.mentions) {
    mentions.push_back({{"surface", mention.surface},
                        {"begin", mention.char_span.begin},
                        {"end", mention.char_span.end}});
  }
  json answers = json::array();
  for (const auto& answer : trace.answers) {
    answers.push_back({{"sentence_id", trace.sentence_id},
                       {"drug", answer.mention.surface},
                       {"pred_start_char", answer.prediction.char_span.begin},
                       {"pred_end_char", answer.prediction.char_span.end},
                       {"answer_text", answer.prediction.answer_text},
                       {"score", answer.prediction.score}});
  }
  json out{{"sentence_id", trace.sentence_id},
           {"eliminated_at", elimination_name(trace.eliminated_at)},
           {"mentions", mentions},
           {"answers", answers}};
  if (trace.relevance_probability.has_value()) {
    out["relevance_probability"] = *trace.relevance_probability;
  }
  if (trace.category_exact.has_value()) {
    out["category_exact"] =
        std::string(outcome_category_name(*trace.category_exact));
  }
  if (trace.category_overlap.has_value()) {
    out["category_overlap"] =
        std::string(outcome_category_name(*trace.category_overlap));
  }
  return out;
}

}  // namespace

std::string RunReport::to_json_text() const {
  json stage_metrics{
      {"ner",
       {{"pos_total", ner.pos_total},
        {"pos_with_drug", ner.pos_with_drug},
        {"neg_total", ner.neg_total},
        {"neg_with_drug", ner.neg_with_drug}}},
      {"classifier",
       {{"reached", classifier.reached},
        {"tp", classifier.counts.tp},
        {"fp", classifier.counts.fp},
        {"fn", classifier.counts.fn},
        {"p", classifier.scores.precision},
        {"r", classifier.scores.recall},
        {"f1", classifier.scores.f1}}},
      {"qa",
       {{"reached_positives", qa.reached_positives},
        {"exact_correct", qa.exact_correct},
        {"overlap_correct", qa.overlap_correct}}}};

  json tallies = json::object();
  json end_to_end = json::object();
  if (exact.has_value()) {
    tallies["exact"] = tally_to_json(exact->tally);
    end_to_end["exact"] = prf_to_json(exact->scores);
  }
  if (overlap.has_value()) {
    tallies["overlap"] = tally_to_json(overlap->tally);
    end_to_end["overlap"] = prf_to_json(overlap->scores);
  }

  json out{{"config", config_to_json(config)},
           {"stage_metrics", stage_metrics},
           {"cascade_tally", tallies},
           {"end_to_end", end_to_end}};
  if (include_traces) {
    json trace_array = json::array();
    for (const auto& trace : traces) trace_array.push_back(trace_to_json(trace));
    out["traces"] = trace_array;
  }
  return out.dump(2) + "\n";
}

RunReport evaluate_end_to_end(const TrainedBundle& bundle,
                              const std::vector<LabeledSentence>& test_sentences,
                              bool include_traces) {
  PipelineRuntime runtime(bundle);
  const PipelineConfig& config = bundle.config;

  std::vector<SentenceTrace> traces(test_sentences.size());
  parallel_for(test_sentences.size(), config.jobs, [&](std::size_t i) {
    traces[i] = runtime.run(test_sentences[i]);
  });

  const bool want_exact = config.match != MatchSelection::Overlap;
  const bool want_overlap = config.match != MatchSelection::Exact;

  RunReport report;
  report.config = config;
  report.include_traces = include_traces;
  if (want_exact) report.exact.emplace();
  if (want_overlap) report.overlap.emplace();

  for (std::size_t i = 0; i < test_sentences.size(); ++i) {
    const LabeledSentence& sentence = test_sentences[i];
    SentenceTrace& trace = traces[i];
    const bool positive = sentence.label == Label::Positive;
    const bool drug_found = !trace.mentions.empty();
    const bool passed =
        drug_found && classify_relevant(trace.relevance_probability.value_or(0.0),
                                        config.tau);
    const bool reached_qa = drug_found && passed;

    if (positive) {
      ++report.ner.pos_total;
      if (drug_found) ++report.ner.pos_with_drug;
    } else {
      ++report.ner.neg_total;
      if (drug_found) ++report.ner.neg_with_drug;
    }
    if (drug_found) {
      ++report.classifier.reached;
      if (positive && passed) ++report.classifier.counts.tp;
      if (!positive && passed) ++report.classifier.counts.fp;
      if (positive && !passed) ++report.classifier.counts.fn;
    }

    bool exact_correct = false;
    bool overlap_correct = false;
    if (reached_qa && positive) {
      ++report.qa.reached_positives;
      exact_correct = positive_answer_correct(sentence, trace,
                                              MatchCriterion::Exact,
                                              config.pair_rule);
      overlap_correct = positive_answer_correct(sentence, trace,
                                                MatchCriterion::Overlap,
                                                config.pair_rule);
      if (exact_correct) ++report.qa.exact_correct;
      if (overlap_correct) ++report.qa.overlap_correct;
    }

    auto verdict = [&](bool correct) -> std::optional<bool> {
      if (!reached_qa) return std::nullopt;
      return positive ? std::optional<bool>(correct) : std::optional<bool>(false);
    };
    if (report.exact.has_value()) {
      trace.category_exact = categorize_sentence(sentence.label, drug_found,
                                                 passed, verdict(exact_correct));
      report.exact->tally.add(*trace.category_exact);
    }
    if (report.overlap.has_value()) {
      trace.category_overlap = categorize_sentence(
          sentence.label, drug_found, passed, verdict(overlap_correct));
      report.overlap->tally.add(*trace.category_overlap);
    }
  }

  report.classifier.scores = prf_scores(report.classifier.counts);

  const auto n = static_cast<long long>(test_sentences.size());
  auto finish_block = [&](EndToEndBlock& block) {
    block.counts = cascade_confusion(block.tally);
    block.scores = prf_scores(block.counts);
    if (block.tally.total() != n ||
        block.counts.tp + block.counts.fn + block.counts.fp != n) {
      throw InvariantError(
          "cascade partition identity violated: categories do not cover the "
          "test set exactly");
    }
  };
  if (report.exact.has_value()) finish_block(*report.exact);
  if (report.overlap.has_value()) finish_block(*report.overlap);

  if (include_traces) report.traces = std::move(traces);
  return report;
}

namespace {

json params_to_json(const ParameterSet& params) {
  json out = json::array();
  for (const auto& p : params) {
    out.push_back({{"name", p.name},
                   {"rows", p.value.rows()},
                   {"cols", p.value.cols()},
                   {"data", p.value.data()}});
  }
  return out;
}

void params_from_json(const json& j, ParameterSet& params, const char* what) {
  if (!j.is_array() || j.size() != params.size()) {
    throw InvariantError(std::string(what) +
                         ": bundle parameter count does not match the model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& pj = j[i];
    Parameter& p = params[i];
    if (pj.at("name").get<std::string>() != p.name ||
        pj.at("rows").get<std::size_t>() != p.value.rows() ||
        pj.at("cols").get<std::size_t>() != p.value.cols()) {
      throw InvariantError(std::string(what) + ": parameter '" + p.name +
                           "' has mismatched name or dimensions in the bundle");
    }
    std::vector<double> data = pj.at("data").get<std::vector<double>>();
    if (data.size() != p.value.data().size()) {
      throw InvariantError(std::string(what) + ": parameter '" + p.name +
                           "' has wrong element count in the bundle");
    }
    p.value.data() = std::move(data);
  }
}

constexpr const char* kBundleFormat = "bundle-v1";

std::string checksum_hex(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << value;
  return out.str();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void save_bundle(const TrainedBundle& bundle, const std::string& path) {
  json payload;
  payload["config"] = config_to_json(bundle.config);

  json lexicon = json::array();
  for (const auto& entry : bundle.lexicon.entries) lexicon.push_back(entry);
  payload["lexicon"] = lexicon;

  json vocab_tokens = json::array();
  for (std::size_t id = Vocabulary::kReservedCount; id < bundle.vocab.size();
       ++id) {
    vocab_tokens.push_back(bundle.vocab.token_of(static_cast<int>(id)));
  }
  payload["vocab"] = {{"min_count", bundle.vocab.min_count()},
                      {"tokens", vocab_tokens}};

  json relevance_models = json::array();
  for (const auto& model : bundle.relevance.models) {
    relevance_models.push_back(params_to_json(model.params()));
  }
  payload["relevance"] = {{"tau", bundle.relevance.tau},
                          {"models", relevance_models}};

  json qa_models = json::array();
  for (const auto& model : bundle.qa.models) {
    qa_models.push_back(params_to_json(model.params()));
  }
  payload["qa"] = {{"models", qa_models}};

  json file{{"format", kBundleFormat},
            {"checksum", checksum_hex(fnv1a64(payload.dump()))},
            {"payload", payload}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write bundle file: " + path);
  out << file.dump(2) << "\n";
}

TrainedBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bundle file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  json file;
  try {
    file = json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw CorruptBundle("bundle is not parseable JSON (" + path +
                        "): " + e.what());
  }

  try {
    const std::string format = file.at("format").get<std::string>();
    if (format != kBundleFormat) {
      throw VersionMismatch("bundle format '" + format +
                            "' is not supported; this build reads '" +
                            kBundleFormat + "'");
    }
    const json& payload = file.at("payload");
    if (checksum_hex(fnv1a64(payload.dump())) !=
        file.at("checksum").get<std::string>()) {
      throw CorruptBundle("bundle checksum mismatch: " + path);
    }

    TrainedBundle bundle;
    bundle.config = config_from_json(payload.at("config"));
    bundle.config.validate();

    for (const auto& entry : payload.at("lexicon")) {
      bundle.lexicon.entries.insert(entry.get<std::string>());
    }
    bundle.lexicon.source = path;
    if (bundle.lexicon.entries.empty()) {
      throw CorruptBundle("bundle lexicon is empty: " + path);
    }

    const json& vocab_json = payload.at("vocab");
    bundle.vocab = Vocabulary::from_entries(
        vocab_json.at("tokens").get<std::vector<std::string>>(),
        vocab_json.at("min_count").get<std::size_t>());

    const json& relevance_json = payload.at("relevance");
    bundle.relevance.tau = relevance_json.at("tau").get<double>();
    for (const auto& model_json : relevance_json.at("models")) {
      RelevanceModel model(bundle.vocab.size(), bundle.config.embed_dim,
                           bundle.config.hidden_dim);
      params_from_json(model_json, model.params(), "relevance");
      bundle.relevance.models.push_back(std::move(model));
    }
    if (bundle.relevance.models.empty()) {
      throw CorruptBundle("bundle has no relevance models: " + path);
    }

    for (const auto& model_json : payload.at("qa").at("models")) {
      QaModel model(bundle.vocab.size(), bundle.config.embed_dim);
      params_from_json(model_json, model.params(), "qa");
      bundle.qa.models.push_back(std::move(model));
    }
    if (bundle.qa.models.empty()) {
      throw CorruptBundle("bundle has no QA models: " + path);
    }
    return bundle;
  } catch (const json::exception& e) {
    throw CorruptBundle("bundle JSON structure invalid (" + path +
                        "): " + e.what());
  }
}

}  // namespace ade
