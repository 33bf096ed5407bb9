#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moralkb/corpus.hpp"

namespace moralkb {

// ---------------------------------------------------------------------------
// Word embeddings

/// Frozen word vectors stored contiguously.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  /// Throws DataError on a wrong-length vector or a duplicate word.
  void add(std::string word, std::span<const float> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }

  /// Exact-match lookup.
  std::optional<std::span<const float>> find(std::string_view word) const;
  /// Exact match first, then the ASCII-lowercased word.
  std::optional<std::span<const float>> lookup(std::string_view word) const;

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Text format: header "V D", then V lines "word v1 ... vD".
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view text, std::string_view source = "embeddings");
std::string serialize_embeddings(const EmbeddingTable& table);

/// dot(u, v) / (|u| |v|), or 0 when either norm is zero. Throws DataError on
/// a length mismatch.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(std::span<const double> u, std::span<const double> v);

// ---------------------------------------------------------------------------
// Moral Foundation Dictionary

struct MFDictionary {
  struct Entry {
    std::string pattern;  // literal word, or a stem ending in '*'
    std::size_t category;
  };
  std::vector<std::string> categories;
  std::vector<Entry> entries;

  bool matches(std::size_t category, std::string_view lower_token) const;
};

/// Lines "pattern<TAB>category"; categories are numbered in order of first
/// appearance.
MFDictionary load_mfd(const std::filesystem::path& path);
MFDictionary parse_mfd(std::string_view text, std::string_view source = "mfd");

std::string serialize_mfd(const MFDictionary& dict);

/// Per category, the fraction of tokens matching any of its patterns.
std::vector<double> mfd_vector(std::span<const std::string> tokens, const MFDictionary& dict);

// ---------------------------------------------------------------------------
// cPMId feature selection

struct CpmidConfig {
  /// Significance parameter. 1 switches the correction off (plain document
  /// PMI), which is the continuous limit of the measure.
  double delta = 0.9;
  std::size_t k = 100;
  /// Words found in fewer documents are not ranked.
  std::size_t min_df = 2;

  void validate() const;
};

struct LabelledDoc {
  std::vector<std::string> tokens;
  bool positive = false;
};

struct CooccurrenceCounts {
  std::size_t docs = 0;           // D
  std::size_t with_word = 0;      // d(w)
  std::size_t positive = 0;       // d(f)
  std::size_t word_positive = 0;  // d(w, f)
};

/// log2 of d(w,f) / (d(w) d(f) / D + sqrt(d(w)) sqrt(ln(1/delta) / 2)).
/// Returns -infinity when d(w,f) = 0; throws DataError when d(w) = 0.
double cpmid_from_counts(const CooccurrenceCounts& c, double delta);

/// Plain document PMI, log2(d(w,f) D / (d(w) d(f))).
double document_pmi(const CooccurrenceCounts& c);

/// Single-pass document frequency index over lowercased tokens.
class DocumentIndex {
 public:
  explicit DocumentIndex(std::span<const LabelledDoc> docs);

  CooccurrenceCounts counts(std::string_view word) const;
  std::size_t docs() const { return docs_; }
  std::size_t positive_docs() const { return positive_; }
  /// Vocabulary in lexicographic order.
  std::vector<std::string> vocabulary() const;

 private:
  struct Freq {
    std::size_t df = 0;
    std::size_t df_positive = 0;
  };
  std::size_t docs_ = 0;
  std::size_t positive_ = 0;
  std::unordered_map<std::string, Freq> freq_;
};

/// cPMId of `word` (matched case-insensitively) against the positive class.
double cpmid(std::string_view word, std::span<const LabelledDoc> docs, const CpmidConfig& cfg);

struct FoundationFeatureSet {
  MoralClass target = MoralClass::CareHarm;
  /// (word, score) in descending score order; ties in lexicographic order.
  std::vector<std::pair<std::string, double>> features;
};

/// Top-k words by cPMId. Throws DataError when no document is positive.
FoundationFeatureSet select_features(std::span<const LabelledDoc> docs, MoralClass target,
                                     const CpmidConfig& cfg);

/// Map-based form: each tweet's knowledge tokens, labelled by its gold flag
/// for `target`. Tweets missing from `gold` are ignored.
FoundationFeatureSet select_features(const std::map<std::string, std::vector<std::string>>& docs,
                                     const std::map<std::string, LabelSet>& gold,
                                     MoralClass target, const CpmidConfig& cfg);

/// "word<TAB>score" lines.
std::string serialize_feature_set(const FoundationFeatureSet& fs);
FoundationFeatureSet parse_feature_set(std::string_view text, MoralClass target,
                                       std::string_view source = "features");

// ---------------------------------------------------------------------------
// Soft term-frequency encoding

struct SoftEncoderConfig {
  double theta = 0.6;
  void validate() const;
};

/// Component i counts tokens equal to feature i (case-insensitive) or whose
/// embedding has cosine >= theta with the feature's embedding.
std::vector<double> soft_encode(std::span<const std::string> tokens, const FoundationFeatureSet& fs,
                                const EmbeddingTable& emb, const SoftEncoderConfig& cfg);

}  // namespace moralkb
