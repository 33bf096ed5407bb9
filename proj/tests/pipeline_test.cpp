#include <gtest/gtest.h>

#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "moralkb/config.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/pipeline.hpp"
#include "moralkb/synthetic.hpp"

using namespace moralkb;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
};

CliResult cli(const std::string& args, const std::string& stdin_text = "") {
  const fs::path in = fs::temp_directory_path() / ("moralkb-stdin-" + std::to_string(::getpid()));
  write_file_atomic(in, stdin_text);
  const std::string cmd = std::string("\"") + MORALKB_CLI_PATH + "\" " + args + " < \"" + in.string() + "\" 2>&1";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  fs::remove(in);
  return r;
}

// A generated data set with every foundation and the KKK entity, written
// once for the whole suite.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("moralkb-pipeline-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    SyntheticOptions opts;
    opts.tweets = 240;
    opts.positive_rate = 0.6;
    opts.foundations = {kFoundations.begin(), kFoundations.end()};
    opts.entities_per_foundation = 4;
    opts.include_kkk = true;
    opts.seed = 3;
    auto ds = make_synthetic(opts);
    for (auto& t : ds.corpus.tweets) t.gold.reset();
    write_file_atomic(dir_ / "corpus.jsonl", serialize_corpus(ds.corpus));
    write_file_atomic(dir_ / "embeddings.txt", serialize_embeddings(ds.embeddings));
    write_file_atomic(dir_ / "mfd.tsv", serialize_mfd(ds.mfd));
    write_file_atomic(dir_ / "fixtures.jsonl", serialize_fixtures(ds.fixtures));
    write_file_atomic(dir_ / "snapshot.jsonl", serialize_snapshot(ds.entities));
    write_file_atomic(conf(), std::string(kConfig));
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path conf() { return dir_ / "moralkb.conf"; }
  static PipelineConfig config() { return load_config(conf()); }
  static std::string args(const std::string& rest) { return "--config \"" + conf().string() + "\" " + rest; }

  static constexpr const char* kConfig =
      "paths.corpus = corpus.jsonl\n"
      "paths.embeddings = embeddings.txt\n"
      "paths.mfd = mfd.tsv\n"
      "paths.output_dir = out\n"
      "linker.fixtures = fixtures.jsonl\n"
      "kb.snapshot = snapshot.jsonl\n"
      "features.k = 40\n"
      "train.hidden_dim = 16\n"
      "train.head_dim = 8\n"
      "train.epochs = 10\n"
      "eval.folds = 3\n"
      "eval.feature_sets = E, E+BK\n";

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Pipeline, StagesWriteArtifactsAndSkipWhenUnchanged) {
  const auto cfg = config();
  const StageOptions opts;
  const Artifacts art{cfg.paths.output_dir};
  EXPECT_FALSE(run_ingest(cfg, opts).skipped);
  EXPECT_TRUE(fs::exists(art.corpus()));
  EXPECT_FALSE(run_link(cfg, opts).skipped);
  EXPECT_TRUE(fs::exists(art.annotations()));
  EXPECT_FALSE(run_fetch_kb(cfg, opts).skipped);
  EXPECT_TRUE(fs::exists(art.knowledge()));
  EXPECT_FALSE(run_select_features(cfg, opts).skipped);
  for (auto c : kMoralClasses) EXPECT_TRUE(fs::exists(art.features(c))) << key_name(c);
  EXPECT_FALSE(run_encode(cfg, opts).skipped);
  EXPECT_TRUE(fs::exists(art.encoded()));

  // Unchanged inputs: every stage is skipped and its artifact left alone.
  const auto before = fs::last_write_time(art.annotations());
  EXPECT_TRUE(run_ingest(cfg, opts).skipped);
  EXPECT_TRUE(run_link(cfg, opts).skipped);
  EXPECT_TRUE(run_fetch_kb(cfg, opts).skipped);
  EXPECT_EQ(fs::last_write_time(art.annotations()), before);

  // A changed setting reruns the affected stage; --force reruns regardless.
  auto changed = cfg;
  changed.linker.filters.rho_threshold = 0.2;
  EXPECT_FALSE(run_link(changed, opts).skipped);
  EXPECT_FALSE(run_link(cfg, opts).skipped);
  EXPECT_TRUE(run_link(cfg, opts).skipped);
  EXPECT_FALSE(run_link(cfg, StageOptions{true, false, nullptr}).skipped);
}

TEST_F(Pipeline, CliTrainPredictFlagsKkk) {
  for (const char* stage : {"ingest", "link", "fetch-kb", "select-features", "encode", "train"}) {
    const auto r = cli(args(stage));
    ASSERT_EQ(r.code, 0) << stage << ": " << r.out;
    EXPECT_FALSE(r.out.empty());
  }
  const Artifacts art{config().paths.output_dir};
  for (auto c : kMoralClasses) EXPECT_TRUE(fs::exists(art.model(c))) << key_name(c);

  const auto r = cli(args("predict"), "we would also like to ban KKK\n");
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  const bool fairness = line.find("\"fairness_cheating\":true") != std::string::npos;
  const bool purity = line.find("\"purity_degradation\":true") != std::string::npos;
  EXPECT_TRUE(fairness || purity) << line;
}

TEST_F(Pipeline, AgreementOfIdenticalColumnsIsOne) {
  const auto r = cli(args("agreement 0 0"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) {
    EXPECT_NE(line.find("PABAK 1.000"), std::string::npos) << line;
    ++rows;
  }
  EXPECT_EQ(rows, kMoralClasses.size());
  EXPECT_EQ(cli(args("agreement 0 7")).code, 2);
}

TEST_F(Pipeline, EvaluateTwiceIsByteIdentical) {
  auto cfg = config();
  cfg.eval.targets = {MoralClass::FairnessCheating};
  const StageOptions opts;
  run_ingest(cfg, opts);
  run_link(cfg, opts);
  run_fetch_kb(cfg, opts);
  const auto table = run_evaluate(cfg, opts).summary;
  EXPECT_NE(table.find("Fairness/Cheating"), std::string::npos);
  const Artifacts art{cfg.paths.output_dir};
  const auto first = read_file(art.report_kv());
  EXPECT_FALSE(run_evaluate(cfg, StageOptions{true, false, nullptr}).skipped);
  EXPECT_EQ(read_file(art.report_kv()), first);
  EXPECT_NE(first.find("cell.fairness_cheating.E+BK.mean = "), std::string::npos);
}

TEST_F(Pipeline, StatsReportsClassBalance) {
  const auto r = cli(args("stats"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Fairness/Cheating"), std::string::npos) << r.out;
}

TEST_F(Pipeline, ExitCodes) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("ingest").code, 1);  // no --config
  EXPECT_EQ(cli("--config /nonexistent.conf ingest").code, 1);
  EXPECT_EQ(cli(args("no-such-stage")).code, 1);

  // Unknown key.
  const auto bad_conf = dir_ / "bad.conf";
  write_file_atomic(bad_conf, std::string(kConfig) + "train.epoch = 3\n");
  auto r = cli("--config \"" + bad_conf.string() + "\" ingest");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("train.epoch"), std::string::npos) << r.out;

  // Malformed corpus: a data error naming the file and line.
  const auto bad_dir = dir_ / "bad";
  write_file_atomic(bad_dir / "corpus.jsonl", "{\"id\":\"a\",\"raw_text\":\"x\"}\n{broken\n");
  write_file_atomic(bad_dir / "bad.conf",
                    "paths.corpus = corpus.jsonl\npaths.embeddings = ../embeddings.txt\n"
                    "paths.mfd = ../mfd.tsv\nlinker.fixtures = ../fixtures.jsonl\n"
                    "kb.snapshot = ../snapshot.jsonl\n");
  r = cli("--config \"" + (bad_dir / "bad.conf").string() + "\" ingest");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("corpus.jsonl:2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ingest"), std::string::npos) << r.out;

  // Remote linker with nothing cached and no network allowed.
  write_file_atomic(bad_dir / "remote.conf",
                    "paths.corpus = ../corpus.jsonl\npaths.embeddings = ../embeddings.txt\n"
                    "paths.mfd = ../mfd.tsv\nlinker.mode = remote\nlinker.endpoint = http://127.0.0.1:1/tag\n"
                    "linker.cache_dir = cache\nlinker.retries = 1\nkb.snapshot = ../snapshot.jsonl\n"
                    "paths.output_dir = remote-out\n");
  const std::string remote = "--config \"" + (bad_dir / "remote.conf").string() + "\" ";
  ASSERT_EQ(cli(remote + "ingest").code, 0);
  EXPECT_EQ(cli(remote + "--offline link").code, 3);
  EXPECT_EQ(cli(remote + "link").code, 3);
}

TEST_F(Pipeline, MissingInputFileRejectedBeforeRunning) {
  auto cfg = config();
  cfg.paths.embeddings = dir_ / "missing.txt";
  EXPECT_THROW(validate_inputs(cfg, Stage::Evaluate), UsageError);
  EXPECT_NO_THROW(validate_inputs(config(), Stage::Evaluate));
}

TEST_F(Pipeline, SeedFlagOverridesConfig) {
  const auto out = dir_ / "seeded";
  const std::string env =
      "MORALKB_EVAL_TARGETS=fairness_cheating MORALKB_PATHS_OUTPUT_DIR=\"" + out.string() + "\" ";
  auto run = [&](const std::string& stage) {
    return std::system((env + "\"" + MORALKB_CLI_PATH + "\" " + args("--seed 77 " + stage) + " > /dev/null 2>&1").c_str());
  };
  for (const char* stage : {"ingest", "link", "fetch-kb", "evaluate"}) ASSERT_EQ(run(stage), 0) << stage;
  EXPECT_NE(read_file(out / "report.kv").find("config.eval.seed = 77"), std::string::npos);
}
