#pragma once

// Cross-validated evaluation of the per-class classifiers.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/diagnostics.hpp"
#include "moralkb/features.hpp"
#include "moralkb/model.hpp"
#include "moralkb/rng.hpp"

namespace moralkb {

// ---------------------------------------------------------------------------
// Turning tweets into model inputs

/// Embedding columns for the tokens found in `emb` (exact, then lowercase).
/// A tweet with no known token becomes a single zero column.
std::shared_ptr<const Eigen::MatrixXd> embed_sequence(std::span<const std::string> tokens,
                                                      const EmbeddingTable& emb);

Eigen::VectorXd to_vector(std::span<const double> v);

// ---------------------------------------------------------------------------
// Folds and balancing

struct FoldPlan {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignments;  // tweet id -> fold

  std::size_t fold_of(const std::string& id) const;
};

/// Stratified folds for `target`: each class is shuffled with the seeded rng
/// and dealt round-robin, negatives continuing where positives stopped so the
/// fold sizes stay balanced. Throws DataError if k < 2 or a class is empty;
/// records a diagnostic when there are fewer positives than folds.
FoldPlan make_folds(const Corpus& corpus, MoralClass target, std::size_t k, std::uint64_t seed,
                    Diagnostics* diag = nullptr);

/// Row indices after balancing: every minority-class row appears
/// floor(majority / minority) times, a seeded sample of the minority rows
/// without replacement gets one more copy, and the result is shuffled.
/// Majority rows appear exactly once. Throws DataError on single-class input.
std::vector<std::size_t> upsample_indices(const std::vector<bool>& positive, std::uint64_t seed);

template <class T, class IsPositive>
std::vector<T> upsample(std::span<const T> rows, IsPositive is_positive, std::uint64_t seed) {
  std::vector<bool> flags;
  flags.reserve(rows.size());
  for (const auto& r : rows) flags.push_back(static_cast<bool>(is_positive(r)));
  std::vector<T> out;
  for (std::size_t i : upsample_indices(flags, seed)) out.push_back(rows[i]);
  return out;
}

/// F1 of the positive class; 0 when there are no predicted or no gold
/// positives. Throws DataError on a length mismatch.
double f_score(const std::vector<bool>& predictions, const std::vector<bool>& golds);

// ---------------------------------------------------------------------------
// Experiments

/// Everything an experiment reads. Pointers are borrowed.
struct ExperimentData {
  const Corpus* corpus = nullptr;  // gold labels required
  const EmbeddingTable* embeddings = nullptr;
  const MFDictionary* mfd = nullptr;  // required for MFD feature sets
  /// Background-knowledge tokens per tweet id; absent ids have none.
  const std::map<std::string, std::vector<std::string>>* knowledge = nullptr;
};

struct ExperimentConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::vector<FeatureSet> feature_sets{kFeatureSets.begin(), kFeatureSets.end()};
  std::vector<MoralClass> targets{kMoralClasses.begin(), kMoralClasses.end()};
  ClassifierKind classifier = ClassifierKind::Lstm;
  CpmidConfig cpmid;
  SoftEncoderConfig soft;
  TrainConfig train;  // flags and seed are set per run
  std::size_t threads = 1;
};

/// Row key of the Non-moral rule derived from the five foundation
/// classifiers' out-of-fold predictions.
inline constexpr std::string_view kDerivedNonMoralRow = "non_moral_derived";

struct ReportCell {
  std::vector<double> folds;
  double mean = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> rows;  // key_name() of each class, plus kDerivedNonMoralRow
  std::vector<FeatureSet> feature_sets;
  std::map<std::pair<std::string, FeatureSet>, ReportCell> cells;
  std::vector<std::pair<std::string, std::string>> config;

  const ReportCell& cell(std::string_view row, FeatureSet fs) const;

  /// Aligned table of mean F-scores in percent.
  std::string table() const;
  /// "key = value" lines: cell.<row>.<set>.mean, cell.<row>.<set>.fold.<i>,
  /// config.<key>. Byte-stable for identical inputs.
  std::string key_values() const;
};

/// Per target and feature set, per fold: select BK features on the training
/// part only, encode, up-sample the training part, train, score the held-out
/// fold. Errors are rethrown with (class, fold) context.
ExperimentReport run_experiment(const ExperimentData& data, const ExperimentConfig& cfg,
                                Diagnostics* diag = nullptr);

}  // namespace moralkb
