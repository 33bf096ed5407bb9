#pragma once

// The pipeline stages behind the command-line tool. Each stage reads the
// previous stage's artifact from the output directory, writes its own, and
// returns a one-line summary. A stage whose inputs and settings are
// unchanged since its last run is skipped unless forced.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "moralkb/config.hpp"
#include "moralkb/eval.hpp"
#include "moralkb/model.hpp"

namespace moralkb {

enum class Stage { Ingest, Link, FetchKb, SelectFeatures, Encode, Train, Evaluate, Predict, Agreement, Stats };

std::string_view stage_name(Stage s);

/// Where each artifact lives under the output directory.
struct Artifacts {
  std::filesystem::path dir;

  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
  std::filesystem::path annotations() const { return dir / "annotations.jsonl"; }
  std::filesystem::path knowledge() const { return dir / "knowledge.jsonl"; }
  std::filesystem::path features(MoralClass c) const;
  std::filesystem::path encoded() const { return dir / "encoded.jsonl"; }
  std::filesystem::path model(MoralClass c) const;
  std::filesystem::path report_table() const { return dir / "report.txt"; }
  std::filesystem::path report_kv() const { return dir / "report.kv"; }
  std::filesystem::path stamp(Stage s) const;
};

struct StageOptions {
  bool force = false;    // ignore up-to-date stamps and refresh caches
  bool offline = false;  // remote clients answer from their caches only
  std::ostream* log = nullptr;  // warnings and diagnostics
};

struct StageResult {
  std::string summary;
  bool skipped = false;
};

/// Checks that every input file the config names exists and that `stage`
/// has what it needs. Throws UsageError otherwise.
void validate_inputs(const PipelineConfig& cfg, Stage stage);

StageResult run_ingest(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_link(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_fetch_kb(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_select_features(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_encode(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_train(const PipelineConfig& cfg, const StageOptions& opts);
/// Writes report.txt and report.kv; the summary is the table.
StageResult run_evaluate(const PipelineConfig& cfg, const StageOptions& opts);

/// Classifies raw texts with the trained models. Each text is normalized,
/// linked and enriched like the corpus (the batch is its own topic for
/// propagation).
std::vector<Prediction> run_predict(const PipelineConfig& cfg, const StageOptions& opts,
                                    const std::vector<std::string>& texts);
/// One JSON object per prediction.
std::string format_prediction(const Prediction& p);

/// Per-class PABAK between two coder columns of the corpus.
std::string run_agreement(const PipelineConfig& cfg, std::size_t coder_a, std::size_t coder_b);

/// Class balance and artifact counts.
std::string run_stats(const PipelineConfig& cfg);

}  // namespace moralkb
