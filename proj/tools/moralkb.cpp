// Command-line front end: one subcommand per pipeline stage.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/pipeline.hpp"

namespace {

using namespace moralkb;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kTransport = 3;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  bool force = false;
};

PipelineConfig load(const GlobalOptions& g) {
  if (g.config.empty()) throw UsageError("--config is required");
  auto cfg = load_config(g.config);
  if (g.seed) cfg.eval.seed = *g.seed;
  return cfg;
}

int run(Stage stage, const GlobalOptions& g, const std::function<void(const PipelineConfig&, const StageOptions&)>& body) {
  const std::string name(stage_name(stage));
  try {
    const auto cfg = load(g);
    validate_inputs(cfg, stage);
    StageOptions opts{g.force, g.offline, &std::cerr};
    body(cfg, opts);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "moralkb " << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const TransportError& e) {
    std::cerr << "moralkb " << name << ": " << e.what() << "\n";
    return kTransport;
  } catch (const std::exception& e) {
    std::cerr << "moralkb " << name << ": " << e.what() << "\n";
    return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moral foundation classification with knowledge-base enrichment"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("-c,--config", g.config, "Pipeline configuration file");
  app.add_option("--seed", g.seed, "Override eval.seed");
  app.add_flag("--offline", g.offline, "Never touch the network; remote clients use their caches");
  app.add_flag("--force", g.force, "Rerun stages even when their inputs are unchanged");

  struct Simple {
    const char* name;
    const char* help;
    Stage stage;
    StageResult (*fn)(const PipelineConfig&, const StageOptions&);
  };
  const std::vector<Simple> simple = {
      {"ingest", "Normalize the corpus and derive gold labels", Stage::Ingest, run_ingest},
      {"link", "Link entities and refine the annotations", Stage::Link, run_link},
      {"fetch-kb", "Fetch and merge knowledge documents", Stage::FetchKb, run_fetch_kb},
      {"select-features", "Rank knowledge words per class", Stage::SelectFeatures, run_select_features},
      {"encode", "Encode knowledge and dictionary features", Stage::Encode, run_encode},
      {"train", "Train one classifier per class", Stage::Train, run_train},
      {"evaluate", "Cross-validate every feature set", Stage::Evaluate, run_evaluate},
  };
  int code = 0;
  for (const auto& s : simple) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->callback([&, s] {
      code = run(s.stage, g, [&](const PipelineConfig& cfg, const StageOptions& opts) {
        std::cout << s.fn(cfg, opts).summary;
        if (s.stage != Stage::Evaluate) std::cout << "\n";
        std::cout.flush();
      });
    });
  }

  auto* predict = app.add_subcommand("predict", "Classify raw text lines from standard input");
  predict->callback([&] {
    code = run(Stage::Predict, g, [&](const PipelineConfig& cfg, const StageOptions& opts) {
      std::vector<std::string> lines;
      for (std::string line; std::getline(std::cin, line);) lines.push_back(line);
      for (const auto& p : run_predict(cfg, opts, lines)) std::cout << format_prediction(p) << "\n";
    });
  });

  std::size_t coder_a = 0, coder_b = 1;
  auto* agreement = app.add_subcommand("agreement", "Per-class PABAK between two coder columns");
  agreement->add_option("coder_a", coder_a, "First coder column (0-based)")->capture_default_str();
  agreement->add_option("coder_b", coder_b, "Second coder column (0-based)")->capture_default_str();
  agreement->callback([&] {
    code = run(Stage::Agreement, g, [&](const PipelineConfig& cfg, const StageOptions&) {
      std::cout << run_agreement(cfg, coder_a, coder_b);
    });
  });

  auto* stats = app.add_subcommand("stats", "Class balance and artifact counts");
  stats->callback([&] {
    code = run(Stage::Stats, g, [&](const PipelineConfig& cfg, const StageOptions&) {
      std::cout << run_stats(cfg);
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }
  return code;
}
