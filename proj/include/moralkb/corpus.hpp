#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace moralkb {

enum class Foundation : int {
  CareHarm = 0,
  FairnessCheating,
  LoyaltyBetrayal,
  AuthoritySubversion,
  PurityDegradation,
};

inline constexpr std::size_t kNumFoundations = 5;

inline constexpr std::array<Foundation, kNumFoundations> kFoundations = {
    Foundation::CareHarm, Foundation::FairnessCheating, Foundation::LoyaltyBetrayal,
    Foundation::AuthoritySubversion, Foundation::PurityDegradation};

/// A foundation or the Non-moral class. The first five values mirror
/// Foundation so the two convert by index.
enum class MoralClass : int {
  CareHarm = 0,
  FairnessCheating,
  LoyaltyBetrayal,
  AuthoritySubversion,
  PurityDegradation,
  NonMoral,
};

inline constexpr std::array<MoralClass, kNumFoundations + 1> kMoralClasses = {
    MoralClass::CareHarm,           MoralClass::FairnessCheating,
    MoralClass::LoyaltyBetrayal,    MoralClass::AuthoritySubversion,
    MoralClass::PurityDegradation,  MoralClass::NonMoral};

constexpr MoralClass to_class(Foundation f) { return static_cast<MoralClass>(static_cast<int>(f)); }
constexpr std::size_t index_of(Foundation f) { return static_cast<std::size_t>(f); }
constexpr std::size_t index_of(MoralClass c) { return static_cast<std::size_t>(c); }

/// Display name, e.g. "Care/Harm".
std::string_view display_name(MoralClass c);
/// Key used in files and configs, e.g. "care_harm".
std::string_view key_name(MoralClass c);
/// Parses a key name ("care_harm") or display name ("Care/Harm").
std::optional<MoralClass> parse_class(std::string_view s);

struct LabelSet {
  std::array<bool, kNumFoundations> foundations{};
  bool non_moral = false;

  bool get(MoralClass c) const;
  void set(MoralClass c, bool value);
  bool get(Foundation f) const { return foundations[index_of(f)]; }

  /// False when non_moral disagrees with the all-foundations-negative rule.
  /// Coder labels may be inconsistent; they are kept as given.
  bool consistent() const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

/// True iff all five foundation flags are false.
bool derive_non_moral(const LabelSet& labels);

/// Per-class strict majority; ties resolve to false. Throws DataError on an
/// empty list.
LabelSet majority_vote(const std::vector<LabelSet>& coder_labels);

/// Prevalence-adjusted bias-adjusted kappa for two binary raters: 2*p_o - 1.
double pabak(const std::vector<bool>& a, const std::vector<bool>& b);

struct Tweet {
  std::string id;
  std::string raw_text;
  std::string clean_text;
  std::vector<std::string> tokens;

  /// Builds a tweet by normalizing `raw`.
  static Tweet from_raw(std::string id, std::string raw);
  /// Builds a tweet whose clean text is already known.
  static Tweet from_clean(std::string id, std::string raw, std::string clean);

  friend bool operator==(const Tweet&, const Tweet&) = default;
};

struct AnnotatedTweet {
  Tweet tweet;
  std::vector<LabelSet> coder_labels;
  std::optional<LabelSet> gold;

  friend bool operator==(const AnnotatedTweet&, const AnnotatedTweet&) = default;
};

struct Corpus {
  std::string topic;
  std::vector<AnnotatedTweet> tweets;

  /// Throws DataError naming the first duplicate id.
  void check_unique_ids() const;
  const AnnotatedTweet* find(std::string_view id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct ClassStats {
  std::size_t pos = 0;
  std::size_t neg = 0;
  /// pos / neg, or +infinity when neg == 0.
  double ratio = 0.0;
};

/// Throws DataError listing every tweet id without gold labels.
ClassStats class_stats(const Corpus& corpus, MoralClass c);

/// Returns a copy where tweets with coder labels but no gold get the
/// majority vote as gold.
Corpus with_majority_gold(Corpus corpus);

/// Line-delimited JSON records. The topic is not stored in the file; it is
/// supplied by the caller (defaulting to the file stem).
Corpus load_corpus(const std::filesystem::path& path, std::optional<std::string> topic = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

Corpus parse_corpus(std::string_view text, std::string topic, std::string_view source = "corpus");
std::string serialize_corpus(const Corpus& corpus);

}  // namespace moralkb
