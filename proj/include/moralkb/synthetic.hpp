#pragma once

// Generated corpora with a known answer: tweet text is label-neutral, and the
// only label signal sits in the knowledge-base documents of the entities the
// positive tweets mention. Used for demos and end-to-end checks.

#include <cstdint>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/features.hpp"
#include "moralkb/knowledge.hpp"
#include "moralkb/linking.hpp"

namespace moralkb {

struct SyntheticOptions {
  std::size_t tweets = 200;
  /// Fraction of tweets that are positive for some foundation.
  double positive_rate = 0.3;
  /// Foundations that receive positive tweets.
  std::vector<Foundation> foundations{Foundation::FairnessCheating};
  /// Signal-carrying entities per foundation.
  std::size_t entities_per_foundation = 10;
  /// Entities whose documents carry no signal.
  std::size_t neutral_entities = 10;
  std::size_t dim = 16;
  /// Adds the "KKK" -> Ku Klux Klan entity to the Fairness/Cheating and
  /// Purity/Degradation pools.
  bool include_kkk = false;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  Corpus corpus;  // three coders per tweet, gold = majority
  EmbeddingTable embeddings{1};
  MFDictionary mfd;
  std::vector<FixtureEntry> fixtures;
  std::vector<KBEntity> entities;
};

SyntheticDataset make_synthetic(const SyntheticOptions& options);

/// Marker-token toy set: positive tweets contain a word whose embedding is
/// far from every other word, so an E-only model can separate the classes.
SyntheticDataset make_separable(std::size_t tweets, std::size_t dim, std::uint64_t seed);

}  // namespace moralkb
