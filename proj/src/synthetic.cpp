#include "moralkb/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "moralkb/errors.hpp"
#include "moralkb/rng.hpp"
#include "moralkb/text.hpp"

namespace moralkb {

namespace {

// Everyday words the tweets are built from. None carries label signal.
const std::vector<std::string> kTweetWords = {
    "people", "storm",  "today",  "city",    "news",   "said",   "talked", "again",
    "really", "think",  "week",   "power",   "water",  "school", "friends", "morning",
    "street", "coast",  "night",  "bridge",  "train",  "update", "photo",  "video",
    "wind",   "rain",   "house",  "traffic", "report", "crowd",  "meeting", "local",
    "town",   "shelter", "road",  "boat",    "river",  "market", "evening", "weekend"};

// Filler for knowledge-base documents, shared by every entity.
const std::vector<std::string> kFillerWords = {
    "organization", "founded", "group",    "known",  "members", "based",   "history",
    "established",  "region",  "national", "public", "members", "century", "located"};

// Topical words for the documents of signal-free entities.
const std::vector<std::string> kNeutralTopicWords = {
    "music",   "football", "museum",  "harbor",   "railway", "festival", "garden", "bakery",
    "theater", "library",  "stadium", "aviation", "textile", "painting", "cinema", "orchard"};

struct FoundationLexicon {
  std::vector<std::string> signal;  // words placed in knowledge documents
  std::string virtue, vice;         // MFD category names
  std::vector<std::string> virtue_patterns, vice_patterns;
};

const std::array<FoundationLexicon, kNumFoundations>& lexicons() {
  static const std::array<FoundationLexicon, kNumFoundations> table = {{
      {{"care", "protect", "compassion", "kindness", "suffering", "cruelty", "harm", "hurt"},
       "HarmVirtue", "HarmVice",
       {"care", "protect*", "compassion*", "kind*"},
       {"harm*", "suffer*", "cruel*", "hurt*"}},
      {{"justice", "fairness", "rights", "equality", "cheating", "fraud", "equal", "bias"},
       "FairnessVirtue", "FairnessVice",
       {"justice", "fair*", "rights", "equal*"},
       {"cheat*", "fraud*", "bias*", "unjust*"}},
      {{"loyalty", "solidarity", "nation", "allegiance", "betrayal", "traitor", "unity", "patriot"},
       "IngroupVirtue", "IngroupVice",
       {"loyal*", "solidarity", "nation*", "patriot*"},
       {"betray*", "traitor*", "treason*", "disloyal*"}},
      {{"authority", "obedience", "law", "order", "tradition", "duty", "rebellion", "defiance"},
       "AuthorityVirtue", "AuthorityVice",
       {"authorit*", "obey*", "law", "duty"},
       {"rebel*", "defian*", "riot*", "subver*"}},
      {{"sacred", "holy", "purity", "faith", "sin", "disgust", "chastity", "filth"},
       "PurityVirtue", "PurityVice",
       {"sacred", "holy", "pur*", "faith*"},
       {"sin", "disgust*", "filth*", "impur*"}},
  }};
  return table;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<float> random_vector(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Pronounceable names that are not English words, hence absent from the
// embedding table.
std::string make_name(Rng& rng) {
  static const std::array<const char*, 16> onset = {"v", "t", "q", "z", "k", "dr", "br", "m",
                                                    "n", "th", "gr", "s", "l", "p", "r", "x"};
  static const std::array<const char*, 6> vowel = {"a", "e", "i", "o", "u", "ae"};
  static const std::array<const char*, 8> coda = {"rn", "lk", "x", "nd", "v", "th", "r", "z"};
  std::string s;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t i = 0; i < syllables; ++i) {
    s += onset[rng.below(onset.size())];
    s += vowel[rng.below(vowel.size())];
  }
  s += coda[rng.below(coda.size())];
  return capitalize(s);
}

struct EntitySpec {
  std::string surface;
  std::string title;
  std::vector<Foundation> labels;
};

std::string pick(Rng& rng, const std::vector<std::string>& words) {
  return words[rng.below(words.size())];
}

KBEntity make_entity(const EntitySpec& spec, Rng& rng) {
  KBEntity e;
  e.title = spec.title;
  e.types = {"Organisation"};
  std::string abstract = spec.surface + " is a " + pick(rng, kFillerWords) + " " +
                         pick(rng, kFillerWords) + " " + pick(rng, kFillerWords);
  std::vector<std::string> purpose;
  if (spec.labels.empty()) {
    abstract += " for " + pick(rng, kNeutralTopicWords) + " and " + pick(rng, kNeutralTopicWords);
    purpose.push_back(pick(rng, kNeutralTopicWords) + " " + pick(rng, kFillerWords));
  } else {
    for (auto f : spec.labels) {
      const auto& words = lexicons()[index_of(f)].signal;
      abstract += " for " + pick(rng, words) + " " + pick(rng, words) + " and " + pick(rng, words);
      purpose.push_back(pick(rng, words) + " " + pick(rng, words));
    }
  }
  e.abstract = abstract + ".";
  e.properties["purpose"] = purpose;
  e.properties["background"] = {pick(rng, kFillerWords) + " " + pick(rng, kFillerWords)};
  return e;
}

LabelSet labels_for(const std::vector<Foundation>& fs) {
  LabelSet l;
  for (auto f : fs) l.foundations[index_of(f)] = true;
  l.non_moral = derive_non_moral(l);
  return l;
}

LabelSet noisy_copy(const LabelSet& gold, Rng& rng) {
  LabelSet l = gold;
  for (auto& flag : l.foundations) {
    if (rng.uniform() < 0.15) flag = !flag;
  }
  l.non_moral = derive_non_moral(l);
  return l;
}

MFDictionary make_mfd() {
  MFDictionary dict;
  for (const auto& lex : lexicons()) {
    for (const auto* side : {&lex.virtue, &lex.vice}) {
      dict.categories.push_back(*side);
      const auto& patterns = side == &lex.virtue ? lex.virtue_patterns : lex.vice_patterns;
      for (const auto& p : patterns) dict.entries.push_back({p, dict.categories.size() - 1});
    }
  }
  dict.categories.push_back("MoralityGeneral");
  for (const char* p : {"moral*", "ethic*", "virtue*", "values"})
    dict.entries.push_back({p, dict.categories.size() - 1});
  return dict;
}

Tweet make_tweet(const std::string& id, const std::vector<std::string>& words,
                 const std::string& mention, Rng& rng) {
  std::vector<std::string> parts = words;
  const std::size_t pos = 1 + rng.below(parts.size());
  parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(pos), mention);
  std::string raw = join(parts, " ");
  if (rng.uniform() < 0.2) raw = "@" + pick(rng, kTweetWords) + "_fan " + raw;
  if (rng.uniform() < 0.2) raw += " http://t.co/" + std::to_string(rng.below(100000));
  return Tweet::from_raw(id, raw);
}

}  // namespace

SyntheticDataset make_synthetic(const SyntheticOptions& options) {
  if (options.tweets == 0 || options.dim == 0) throw UsageError("synthetic corpus needs tweets and a dimension");
  if (options.foundations.empty() || options.entities_per_foundation == 0 ||
      options.neutral_entities == 0)
    throw UsageError("synthetic corpus needs signal and neutral entities");
  if (!(options.positive_rate > 0.0 && options.positive_rate < 1.0))
    throw UsageError("positive_rate must lie in (0, 1)");

  Rng rng(options.seed);
  SyntheticDataset ds;
  ds.embeddings = EmbeddingTable(options.dim);
  ds.mfd = make_mfd();
  ds.corpus.topic = "synthetic";

  // Embeddings: neutral words are random; each foundation's signal words
  // cluster around a shared direction.
  std::set<std::string> vocab;
  auto add_word = [&](const std::string& w, std::vector<float> v) {
    if (vocab.insert(w).second) ds.embeddings.add(w, v);
  };
  for (const auto* bank : {&kTweetWords, &kFillerWords, &kNeutralTopicWords})
    for (const auto& w : *bank) add_word(w, random_vector(rng, options.dim));
  for (const auto& lex : lexicons()) {
    const auto centre = random_vector(rng, options.dim);
    for (const auto& w : lex.signal) {
      auto v = random_vector(rng, options.dim);
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = centre[d] + 0.4f * v[d];
      add_word(w, v);
    }
  }
  for (const char* w : {"ku", "klux", "klan", "hate"}) add_word(w, random_vector(rng, options.dim));

  // Entities.
  std::set<std::string> names;
  auto fresh_name = [&] {
    while (true) {
      auto n = make_name(rng);
      if (!vocab.count(ascii_lower(n)) && names.insert(n).second) return n;
    }
  };
  std::vector<std::vector<EntitySpec>> pools(kNumFoundations);
  std::vector<EntitySpec> neutral;
  for (auto f : options.foundations) {
    for (std::size_t i = 0; i < options.entities_per_foundation; ++i) {
      auto n = fresh_name();
      pools[index_of(f)].push_back({n, n + " (organization)", {f}});
    }
  }
  if (options.include_kkk) {
    std::vector<Foundation> kkk_labels;
    for (auto f : {Foundation::FairnessCheating, Foundation::PurityDegradation}) {
      if (std::find(options.foundations.begin(), options.foundations.end(), f) !=
          options.foundations.end())
        kkk_labels.push_back(f);
    }
    EntitySpec kkk{"KKK", "Ku Klux Klan", kkk_labels};
    for (auto f : kkk_labels) pools[index_of(f)].push_back(kkk);
  }
  for (std::size_t i = 0; i < options.neutral_entities; ++i) {
    auto n = fresh_name();
    neutral.push_back({n, n + " (organization)", {}});
  }

  std::set<std::string> emitted;
  auto emit_entity = [&](const EntitySpec& spec) {
    if (!emitted.insert(spec.title).second) return;
    ds.fixtures.push_back({spec.surface, spec.title, 0.3 + 0.6 * rng.uniform(), {"Organisation"}});
    KBEntity e = make_entity(spec, rng);
    if (spec.surface == "KKK") {
      e.abstract = "The Ku Klux Klan is a hate group opposed to equality and rights, "
                   "preaching a purity of faith." + std::string(" ") + e.abstract;
    }
    ds.entities.push_back(std::move(e));
  };
  for (const auto& pool : pools)
    for (const auto& spec : pool) emit_entity(spec);
  for (const auto& spec : neutral) emit_entity(spec);

  // Tweets.
  for (std::size_t i = 0; i < options.tweets; ++i) {
    const EntitySpec* spec;
    if (rng.uniform() < options.positive_rate) {
      const auto f = options.foundations[rng.below(options.foundations.size())];
      const auto& pool = pools[index_of(f)];
      spec = &pool[rng.below(pool.size())];
    } else {
      spec = &neutral[rng.below(neutral.size())];
    }
    std::vector<std::string> words;
    const std::size_t len = 4 + rng.below(4);
    for (std::size_t w = 0; w < len; ++w) words.push_back(pick(rng, kTweetWords));

    AnnotatedTweet at;
    at.tweet = make_tweet("t" + std::to_string(i + 1), words, spec->surface, rng);
    const LabelSet gold = labels_for(spec->labels);
    at.coder_labels = {gold, gold, noisy_copy(gold, rng)};
    at.gold = majority_vote(at.coder_labels);
    ds.corpus.tweets.push_back(std::move(at));
  }
  return ds;
}

SyntheticDataset make_separable(std::size_t tweets, std::size_t dim, std::uint64_t seed) {
  if (tweets < 2 || dim == 0) throw UsageError("separable corpus needs at least two tweets");
  Rng rng(seed);
  SyntheticDataset ds;
  ds.embeddings = EmbeddingTable(dim);
  ds.mfd = make_mfd();
  ds.corpus.topic = "separable";
  // The marker owns the first half of the axes (at least one), where every
  // other word is zero, so even the mean embedding separates the classes.
  // Spreading it over several axes keeps it visible under element dropout.
  const std::size_t marker_axes = std::max<std::size_t>(1, dim / 2);
  for (const auto& w : kTweetWords) {
    auto v = random_vector(rng, dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = k < marker_axes ? 0.0f : 0.25f * v[k];
    ds.embeddings.add(w, v);
  }
  std::vector<float> marker(dim, 0.0f);
  for (std::size_t k = 0; k < marker_axes; ++k) marker[k] = 4.0f;
  ds.embeddings.add("zzmarker", marker);

  for (std::size_t i = 0; i < tweets; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<std::string> words;
    const std::size_t len = 3 + rng.below(4);
    for (std::size_t w = 0; w < len; ++w) words.push_back(pick(rng, kTweetWords));
    if (positive) words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(len + 1)), "zzmarker");
    AnnotatedTweet at;
    at.tweet = Tweet::from_raw("s" + std::to_string(i + 1), join(words, " "));
    LabelSet gold;
    gold.foundations[index_of(Foundation::CareHarm)] = positive;
    gold.non_moral = derive_non_moral(gold);
    at.coder_labels = {gold, gold, gold};
    at.gold = gold;
    ds.corpus.tweets.push_back(std::move(at));
  }
  return ds;
}

}  // namespace moralkb
