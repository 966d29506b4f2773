#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include <json.hpp>

#include "ade/corpus.hpp"
#include "ade/pipeline.hpp"
#include "testutil.hpp"

using namespace ade;
using ade::testing::TempDir;
using ade::testing::read_file;
using ade::testing::write_file;

namespace {

struct CmdResult {
  int code = -1;
  std::string output;
};

std::string ade_bin() {
  const char* bin = std::getenv("ADE_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "ADE_BIN must point at the ade executable");
  return bin;
}

CmdResult run_cmd(const std::string& args, bool merge_stderr = false) {
  std::string cmd = ade_bin() + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buffer[4096];
  while (std::fgets(buffer, sizeof(buffer), pipe) != nullptr) {
    result.output += buffer;
  }
  int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

const char* kTrainFlags =
    "--classifier-folds 3 --qa-folds 2 --relevance-epochs 60 --qa-epochs 120 "
    "--relevance-lr 0.05 --qa-lr 0.005 --embed-dim 12 --hidden-dim 12";

// One trained bundle shared by the whole binary.
struct CliFixture {
  TempDir tmp;
  std::string bundle = tmp.file("bundle.json");
  Corpus corpus = generate_synthetic_corpus(50, 50, 7);

  CliFixture() {
    CmdResult train = run_cmd("train --synthetic 50,50 --seed 7 --out " +
                              bundle + " " + kTrainFlags);
    REQUIRE(train.code == 0);
    REQUIRE(train.output.find("bundle written: " + bundle) != std::string::npos);
  }

  const LabeledSentence& a_positive() const {
    for (const auto& s : corpus.sentences) {
      if (s.label == Label::Positive) return s;
    }
    throw std::logic_error("no positive sentence");
  }
};

const CliFixture& cli_fixture() {
  static CliFixture f;
  return f;
}

}  // namespace

TEST_CASE("train writes the bundle, loss logs and a summary table") {
  const auto& f = cli_fixture();
  CHECK(std::filesystem::exists(f.bundle));

  CmdResult train = run_cmd("train --synthetic 20,20 --seed 3 --out " +
                            f.tmp.file("b2.json") + " " + kTrainFlags);
  CHECK(train.code == 0);
  CHECK(train.output.find("stage\tfold\tfinal_loss\n") != std::string::npos);
  CHECK(train.output.find("relevance\t0\t") != std::string::npos);
  CHECK(train.output.find("qa\t1\t") != std::string::npos);
  CHECK(std::filesystem::exists(f.tmp.file("b2.relevance-fold0.loss.tsv")));
  CHECK(std::filesystem::exists(f.tmp.file("b2.qa-fold1.loss.tsv")));

  std::string log = read_file(f.tmp.file("b2.relevance-fold0.loss.tsv"));
  CHECK(log.rfind("1\t", 0) == 0);  // "epoch<TAB>loss" lines

  SUBCASE("vocab and lexicon dumps are optional extras") {
    CmdResult dump = run_cmd("train --synthetic 10,10 --seed 3 --out " +
                             f.tmp.file("b3.json") + " --vocab-out " +
                             f.tmp.file("vocab.tsv") + " --lexicon-out " +
                             f.tmp.file("lex.txt") + " " + kTrainFlags);
    CHECK(dump.code == 0);
    CHECK(read_file(f.tmp.file("vocab.tsv")).rfind("vocab-v1\n", 0) == 0);
    CHECK(read_file(f.tmp.file("lex.txt")).rfind("lexicon-v1\n", 0) == 0);
  }
}

TEST_CASE("train usage and data errors use distinct exit codes") {
  const auto& f = cli_fixture();

  SUBCASE("missing --out is a usage error") {
    CmdResult result = run_cmd("train --synthetic 5,5", true);
    CHECK(result.code == 1);
    CHECK(result.output.find("--out") != std::string::npos);
  }

  SUBCASE("a malformed positive file is a data error naming the line") {
    write_file(f.tmp.file("bad-pos.txt"),
               "1|ok sentence with aspirin and rash|rash|0|4|aspirin|0|7\n"
               "2|broken\n");
    write_file(f.tmp.file("bad-neg.txt"), "1 NEG fine\n");
    CmdResult result = run_cmd("train --pos " + f.tmp.file("bad-pos.txt") +
                                   " --neg " + f.tmp.file("bad-neg.txt") +
                                   " --out " + f.tmp.file("nope.json"),
                               true);
    CHECK(result.code == 2);
    CHECK(result.output.find(":2:") != std::string::npos);
  }

  SUBCASE("no data source is a usage error") {
    CmdResult result = run_cmd("train --out " + f.tmp.file("nope.json"), true);
    CHECK(result.code == 1);
  }
}

TEST_CASE("eval prints the scores it writes to the report") {
  const auto& f = cli_fixture();
  std::string report_path = f.tmp.file("report.json");
  CmdResult eval = run_cmd("eval --bundle " + f.bundle +
                           " --synthetic 50,50 --seed 7 --match both --report " +
                           report_path);
  REQUIRE(eval.code == 0);

  nlohmann::json report = nlohmann::json::parse(read_file(report_path));
  auto line_for = [&](const char* block) {
    const auto& scores = report["end_to_end"][block];
    char line[128];
    std::snprintf(line, sizeof(line), "%s: P=%.2f R=%.2f F1=%.2f\n", block,
                  100.0 * scores["p"].get<double>(),
                  100.0 * scores["r"].get<double>(),
                  100.0 * scores["f1"].get<double>());
    return std::string(line);
  };
  CHECK(eval.output == line_for("exact") + line_for("overlap"));

  SUBCASE("the memorized training set scores perfectly") {
    CHECK(report["end_to_end"]["exact"]["f1"].get<double>() == 1.0);
  }

  SUBCASE("--match both emits both tally blocks") {
    CHECK(report["cascade_tally"].contains("exact"));
    CHECK(report["cascade_tally"].contains("overlap"));
    CHECK(report["cascade_tally"]["exact"].contains("S_neg[+D,+C,-A]"));
  }

  SUBCASE("--match exact emits only the exact block") {
    std::string exact_report = f.tmp.file("exact.json");
    CmdResult only = run_cmd("eval --bundle " + f.bundle +
                             " --synthetic 6,6 --seed 9 --match exact --report " +
                             exact_report);
    REQUIRE(only.code == 0);
    nlohmann::json j = nlohmann::json::parse(read_file(exact_report));
    CHECK(j["cascade_tally"].contains("exact"));
    CHECK_FALSE(j["cascade_tally"].contains("overlap"));
    CHECK(only.output.find("overlap") == std::string::npos);
  }

  SUBCASE("a missing bundle is a data error") {
    CmdResult missing =
        run_cmd("eval --bundle " + f.tmp.file("ghost.json") + " --synthetic 2,2");
    CHECK(missing.code == 2);
  }

  SUBCASE("the report records the evaluated data source") {
    CHECK(report["config"]["eval_data"].get<std::string>() ==
          "synthetic:50,50,seed=7");
  }
}

TEST_CASE("eval is byte-deterministic for fixed seed and flags") {
  const auto& f = cli_fixture();
  std::string bundle_a = f.tmp.file("det-a.json");
  std::string bundle_b = f.tmp.file("det-b.json");
  std::string train_flags = std::string("train --synthetic 20,20 --seed 13 ") +
                            kTrainFlags + " --out ";
  REQUIRE(run_cmd(train_flags + bundle_a).code == 0);
  REQUIRE(run_cmd(train_flags + bundle_b).code == 0);
  CHECK(read_file(bundle_a) == read_file(bundle_b));

  std::string report_a = f.tmp.file("det-a-report.json");
  std::string report_b = f.tmp.file("det-b-report.json");
  std::string eval_flags = " --synthetic 10,10 --seed 99 --traces --report ";
  CmdResult ea = run_cmd("eval --bundle " + bundle_a + eval_flags + report_a);
  CmdResult eb = run_cmd("eval --bundle " + bundle_b + eval_flags + report_b);
  REQUIRE(ea.code == 0);
  REQUIRE(eb.code == 0);
  CHECK(ea.output == eb.output);
  CHECK(read_file(report_a) == read_file(report_b));
}

TEST_CASE("predict answers memorized sentences and reports eliminations") {
  const auto& f = cli_fixture();

  SUBCASE("a memorized positive prints its gold adverse event") {
    const LabeledSentence& sentence = f.a_positive();
    CmdResult result =
        run_cmd("predict --bundle " + f.bundle + " --text '" + sentence.text + "'");
    REQUIRE(result.code == 0);
    const AnnotationPair& pair = sentence.pairs[0];
    char expected[512];
    std::snprintf(expected, sizeof(expected), "%s\t%s\t%zu,%zu\t",
                  pair.drug_surface.c_str(), pair.ae_surface.c_str(),
                  pair.ae_sent_span.begin, pair.ae_sent_span.end);
    CHECK(result.output.rfind(expected, 0) == 0);
  }

  SUBCASE("a drug-free sentence is eliminated at ner") {
    CmdResult result = run_cmd("predict --bundle " + f.bundle +
                               " --text 'Nothing notable happened today.'");
    CHECK(result.code == 0);
    CHECK(result.output == "eliminated at ner\n");
  }

  SUBCASE("an empty --text is a usage error") {
    CmdResult result = run_cmd("predict --bundle " + f.bundle + " --text ''", true);
    CHECK(result.code == 1);
  }

  SUBCASE("predict output is stable across runs") {
    const LabeledSentence& sentence = f.a_positive();
    std::string cmd =
        "predict --bundle " + f.bundle + " --text '" + sentence.text + "'";
    CmdResult first = run_cmd(cmd);
    CmdResult second = run_cmd(cmd);
    CHECK(first.output == second.output);
  }
}

TEST_CASE("a dimension-tampered bundle is an invariant breach at exit 3") {
  const auto& f = cli_fixture();
  nlohmann::json file = nlohmann::json::parse(read_file(f.bundle));
  file["payload"]["config"]["embed_dim"] = 64;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(file["payload"].dump())));
  file["checksum"] = hex;
  std::string tampered = f.tmp.file("tampered.json");
  write_file(tampered, file.dump(2));

  CmdResult result =
      run_cmd("predict --bundle " + tampered + " --text 'aspirin rash'", true);
  CHECK(result.code == 3);
  CHECK(result.output.find("invariant breach") != std::string::npos);
}

TEST_CASE("ingest validates and prints the distribution table") {
  const auto& f = cli_fixture();
  Corpus corpus = generate_synthetic_corpus(12, 30, 55);
  std::string pos = f.tmp.file("ingest-pos.txt");
  std::string neg = f.tmp.file("ingest-neg.txt");
  write_corpus_files(corpus.sentences, pos, neg);

  CmdResult result = run_cmd("ingest --pos " + pos + " --neg " + neg);
  REQUIRE(result.code == 0);
  CHECK(result.output ==
        "ADE unique sentences: 12\n"
        "Non-ADE unique sentences: 30\n"
        "pos=12 neg=30 dedup_dropped=0 offset_misses=0\n");

  SUBCASE("unreadable input is a data error") {
    CmdResult missing = run_cmd("ingest --pos " + f.tmp.file("none.txt") +
                                " --neg " + neg);
    CHECK(missing.code == 2);
  }
}

TEST_CASE("config file supplies defaults and flags override it") {
  const auto& f = cli_fixture();
  PipelineConfig file_config;
  file_config.classifier_folds = 3;
  file_config.qa_folds = 2;
  file_config.relevance_epochs = 30;
  file_config.qa_epochs = 40;
  file_config.relevance_lr = 0.05;
  file_config.qa_lr = 0.005;
  file_config.embed_dim = 10;
  file_config.hidden_dim = 10;
  file_config.seed = 5;
  std::string config_path = f.tmp.file("config.json");
  write_file(config_path, file_config.to_json_text(2));

  std::string out = f.tmp.file("from-config.json");
  CmdResult result = run_cmd("train --synthetic 10,10 --config " + config_path +
                             " --embed-dim 14 --out " + out);
  REQUIRE(result.code == 0);

  TrainedBundle bundle = load_bundle(out);
  CHECK(bundle.config.relevance_epochs == 30);   // from the file
  CHECK(bundle.config.embed_dim == 14);          // flag wins
  CHECK(bundle.config.seed == 5);
  CHECK(bundle.relevance.models.size() == 3);
}

TEST_CASE("eval override flags change the run") {
  const auto& f = cli_fixture();

  SUBCASE("--tau 0 lets every drug-bearing sentence through") {
    std::string strict = f.tmp.file("strict.json");
    std::string lax = f.tmp.file("lax.json");
    REQUIRE(run_cmd("eval --bundle " + f.bundle +
                    " --synthetic 10,10 --seed 31 --report " + strict)
                .code == 0);
    REQUIRE(run_cmd("eval --bundle " + f.bundle +
                    " --synthetic 10,10 --seed 31 --tau 0 --report " + lax)
                .code == 0);
    nlohmann::json strict_report = nlohmann::json::parse(read_file(strict));
    nlohmann::json lax_report = nlohmann::json::parse(read_file(lax));
    CHECK(lax_report["config"]["tau"].get<double>() == 0.0);
    // With tau=0 nothing is filtered by the classifier.
    CHECK(lax_report["cascade_tally"]["exact"]["S_neg[+D,-C]"].get<int>() == 0);
    CHECK(lax_report["cascade_tally"]["exact"]["S_neg[+D,+C,-A]"].get<int>() >=
          strict_report["cascade_tally"]["exact"]["S_neg[+D,+C,-A]"].get<int>());
  }

  SUBCASE("--pair-rule is echoed into the report config") {
    std::string report = f.tmp.file("pair-rule.json");
    REQUIRE(run_cmd("eval --bundle " + f.bundle +
                    " --synthetic 5,5 --seed 3 --pair-rule all --report " +
                    report)
                .code == 0);
    nlohmann::json j = nlohmann::json::parse(read_file(report));
    CHECK(j["config"]["pair_rule"].get<std::string>() == "all");
  }

  SUBCASE("--lexicon swaps the recognizer gazetteer") {
    // An external lexicon without any training drug blinds the NER stage.
    std::string lexicon = f.tmp.file("other-lexicon.txt");
    write_file(lexicon, "lexicon-v1\nunrelateddrugname\n");
    const LabeledSentence& sentence = f.a_positive();
    CmdResult result = run_cmd("predict --bundle " + f.bundle + " --lexicon " +
                               lexicon + " --text '" + sentence.text + "'");
    CHECK(result.code == 0);
    CHECK(result.output == "eliminated at ner\n");
  }
}

TEST_CASE("train can hold out a split and eval can consume it") {
  const auto& f = cli_fixture();
  std::string out = f.tmp.file("split-bundle.json");
  std::string test_pos = f.tmp.file("held-pos.txt");
  std::string test_neg = f.tmp.file("held-neg.txt");
  CmdResult train = run_cmd("train --synthetic 40,40 --seed 21 " +
                            std::string(kTrainFlags) + " --test-fraction 0.25 " +
                            "--test-pos-out " + test_pos + " --test-neg-out " +
                            test_neg + " --out " + out);
  REQUIRE(train.code == 0);
  LoadStats stats;
  Corpus held = load_corpus(test_pos, test_neg, &stats);
  CHECK(stats.positives == 10);
  CHECK(stats.negatives == 10);

  CmdResult eval = run_cmd("eval --bundle " + out + " --pos " + test_pos +
                           " --neg " + test_neg);
  CHECK(eval.code == 0);
  CHECK(eval.output.find("exact: P=") != std::string::npos);
}
