#pragma once

// Entity linking and result refinement.
//
// A Linker proposes annotations for a tweet. refine() then drops low
// confidence links, links to work-like entity types, and mentions without a
// nominal token, and finally repairs low confidence links by borrowing the
// entity of the most confident matching mention elsewhere in the corpus.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/diagnostics.hpp"
#include "moralkb/http.hpp"

namespace moralkb {

/// Code point span into a tweet's clean text, end exclusive.
struct Mention {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Mention&, const Mention&) = default;
};

/// Set on annotations relinked by cross-document propagation.
struct Provenance {
  std::string donor_tweet_id;
  double donor_rho = 0.0;
  std::string original_title;
  double original_rho = 0.0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EntityAnnotation {
  Mention mention;
  std::string entity_title;
  double rho = 0.0;
  std::set<std::string> entity_types;
  std::optional<Provenance> propagated;

  friend bool operator==(const EntityAnnotation&, const EntityAnnotation&) = default;
};

using Annotations = std::vector<EntityAnnotation>;

enum class PosTag { NOUN, PROPN, PRON, VERB, ADJ, ADV, DET, ADP, CONJ, NUM, OTHER };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view s);

struct PosTaggedToken {
  std::string token;
  PosTag tag = PosTag::OTHER;
};

/// Work-like DBpedia types that tend to be linked to common words.
std::set<std::string> default_type_blacklist();

struct LinkerConfig {
  double rho_threshold = 0.1;
  std::set<std::string> type_blacklist = default_type_blacklist();
  std::set<PosTag> nominal_tags = {PosTag::NOUN, PosTag::PROPN};

  /// Throws UsageError when rho_threshold is outside (0, 1).
  void validate() const;
};

class Linker {
 public:
  virtual ~Linker() = default;
  /// Must be safe to call concurrently for distinct tweets.
  virtual Annotations link(const Tweet& tweet) const = 0;
};

struct FixtureEntry {
  std::string surface;
  std::string entity_title;
  double rho = 0.0;
  std::set<std::string> types;
};

/// Offline linker backed by a surface table. Matches whole tokens,
/// case-insensitively, preferring the longest surface at each position.
class FixtureLinker final : public Linker {
 public:
  explicit FixtureLinker(std::vector<FixtureEntry> entries);

  /// Line-delimited records: {"surface", "entity_title", "rho", "types"}.
  static FixtureLinker load(const std::filesystem::path& path);
  static FixtureLinker parse(std::string_view text, std::string_view source = "fixtures");

  Annotations link(const Tweet& tweet) const override;

 private:
  std::map<std::vector<std::string>, FixtureEntry> by_tokens_;
  std::size_t max_tokens_ = 0;
};

std::string serialize_fixtures(const std::vector<FixtureEntry>& entries);

struct RemoteLinkerConfig {
  std::string endpoint;
  std::string api_key;
  std::string lang = "en";
  std::filesystem::path cache_dir;
  HttpRetryPolicy retry;
  std::size_t max_concurrency = 4;
  bool offline = false;
  bool refresh = false;
};

/// Client for a TagMe-style annotation service: GET endpoint?text=...&
/// gcube-token=KEY&lang=en, answering {"annotations": [{"spot", "start",
/// "end", "rho", "title", "types"?}]}. Responses are cached on disk by the
/// SHA-256 of the request text.
class RemoteLinker final : public Linker {
 public:
  explicit RemoteLinker(RemoteLinkerConfig config);
  ~RemoteLinker() override;

  Annotations link(const Tweet& tweet) const override;

  /// Parses a service response against `clean_text`. Annotations whose span
  /// does not match the text are dropped and reported.
  static Annotations parse_response(std::string_view body, std::string_view clean_text,
                                    Diagnostics* diag = nullptr);

 private:
  RemoteLinkerConfig config_;
  std::unique_ptr<HttpGetter> http_;
  std::unique_ptr<DiskCache> cache_;
};

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<PosTaggedToken> tag(std::span<const std::string> tokens) const = 0;
};

/// Lexicon and suffix heuristics. Enough to separate nominal tokens from
/// closed-class and other non-nominal words.
class HeuristicPosTagger final : public PosTagger {
 public:
  std::vector<PosTaggedToken> tag(std::span<const std::string> tokens) const override;
};

std::vector<PosTaggedToken> pos_tag(std::span<const std::string> tokens);

struct ConfidenceSplit {
  Annotations kept;
  Annotations rejected;
};

ConfidenceSplit filter_by_confidence(const Annotations& anns, const LinkerConfig& cfg);
Annotations filter_by_type(const Annotations& anns, const LinkerConfig& cfg);
/// `tagged` must align with the tweet's tokens.
Annotations filter_by_pos(const Annotations& anns, const Tweet& tweet,
                          std::span<const PosTaggedToken> tagged, const LinkerConfig& cfg,
                          Diagnostics* diag = nullptr);

/// Corpus-wide repair of rejected annotations. Only rejected annotations
/// change; each takes the entity of the most confident kept annotation in
/// another tweet whose surface equals it or contains it as a contiguous token
/// run (case-insensitive).
std::map<std::string, Annotations> propagate(
    const std::map<std::string, ConfidenceSplit>& corpus_annotations, const LinkerConfig& cfg);

struct RefineOptions {
  std::size_t max_concurrency = 4;
};

/// link -> confidence -> type -> POS per tweet, then propagation.
std::map<std::string, Annotations> refine(const Corpus& corpus, const Linker& linker,
                                          const PosTagger& tagger, const LinkerConfig& cfg,
                                          Diagnostics* diag = nullptr,
                                          RefineOptions options = {});

/// Line-delimited {"id", "annotations": [...]} records.
std::string serialize_annotations(const std::map<std::string, Annotations>& anns);
std::map<std::string, Annotations> parse_annotations(std::string_view text,
                                                     std::string_view source = "annotations");

}  // namespace moralkb
