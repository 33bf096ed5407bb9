#include "moralkb/linking.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/parallel.hpp"
#include "moralkb/text.hpp"

namespace moralkb {

namespace {

using nlohmann::json;

std::string cp_substr(std::string_view utf8, std::size_t start, std::size_t end) {
  auto cps = utf8_decode(utf8);
  if (start > end || end > cps.size()) return {};
  return utf8_encode(std::u32string_view(cps).substr(start, end - start));
}

// Lowercased tokens of a surface after tweet normalization.
std::vector<std::string> surface_key(std::string_view surface) {
  auto tokens = tokenize(normalize_text(surface));
  for (auto& t : tokens) t = ascii_lower(t);
  return tokens;
}

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

bool by_span(const EntityAnnotation& a, const EntityAnnotation& b) {
  if (a.mention.start != b.mention.start) return a.mention.start < b.mention.start;
  return a.mention.end < b.mention.end;
}

const std::unordered_set<std::string>& lexicon(PosTag tag) {
  static const std::unordered_set<std::string> pron = {
      "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "yourselves",
      "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
      "we", "us", "our", "ours", "ourselves", "they", "them", "their", "theirs", "themselves",
      "who", "whom", "whose", "what", "which", "everything", "everyone", "everybody",
      "something", "someone", "somebody", "anything", "anyone", "anybody", "nothing",
      "nobody", "u", "ur", "ya", "yall"};
  static const std::unordered_set<std::string> det = {
      "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every",
      "all", "both", "either", "neither", "no", "another", "such"};
  static const std::unordered_set<std::string> adp = {
      "in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
      "through", "during", "before", "after", "above", "below", "to", "from", "up", "down",
      "of", "off", "over", "under", "than", "via", "within", "without", "upon", "among",
      "across", "toward", "towards", "behind", "beyond", "near", "w"};
  static const std::unordered_set<std::string> conj = {
      "and", "or", "but", "nor", "yet", "because", "although", "though", "while", "if",
      "unless", "whereas", "n"};
  static const std::unordered_set<std::string> verb = {
      "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had",
      "having", "do", "does", "did", "will", "would", "shall", "should", "can", "could",
      "may", "might", "must", "love", "pray", "help", "hurt", "donate", "stand", "send",
      "protect", "keep", "ask", "talk", "speak", "spoke", "say", "said", "think", "know",
      "need", "want", "make", "go", "went", "come", "came", "get", "got", "give", "gave",
      "take", "took", "see", "saw", "let", "ban", "apply", "listen", "trust", "sound",
      "bless", "touch", "show", "shown", "lie", "die", "work", "thank", "stay", "affect",
      "embody", "believe", "care", "fight", "vote", "lose", "lost", "destroy", "save"};
  static const std::unordered_set<std::string> adv = {
      "not", "very", "too", "also", "just", "only", "really", "never", "always", "here",
      "there", "now", "then", "still", "even", "ever", "again", "so", "soon", "already"};
  static const std::unordered_set<std::string> adj = {
      "good", "bad", "great", "new", "old", "big", "small", "strong", "proud", "holy",
      "safe", "perfect", "profound", "incredible", "corrupt", "biased", "devastating",
      "fellow", "local", "federal", "next", "proper", "collective", "individual", "sad",
      "happy", "true", "false", "free", "brave", "evil", "sacred", "pure", "unfair", "fair"};
  static const std::unordered_set<std::string> none;
  switch (tag) {
    case PosTag::PRON: return pron;
    case PosTag::DET: return det;
    case PosTag::ADP: return adp;
    case PosTag::CONJ: return conj;
    case PosTag::VERB: return verb;
    case PosTag::ADV: return adv;
    case PosTag::ADJ: return adj;
    default: return none;
  }
}

bool is_verb_form(const std::string& lower) {
  const auto& verbs = lexicon(PosTag::VERB);
  if (verbs.count(lower)) return true;
  auto strip = [&](std::string_view suffix) -> std::optional<std::string> {
    if (lower.size() > suffix.size() + 1 && lower.ends_with(suffix))
      return lower.substr(0, lower.size() - suffix.size());
    return std::nullopt;
  };
  for (std::string_view suffix : {"ing", "ed", "es", "s"}) {
    auto stem = strip(suffix);
    if (!stem) continue;
    if (verbs.count(*stem) || verbs.count(*stem + "e")) return true;
    // Doubled consonant: "banned" -> "ban".
    if (stem->size() > 2 && (*stem)[stem->size() - 1] == (*stem)[stem->size() - 2] &&
        verbs.count(stem->substr(0, stem->size() - 1)))
      return true;
    // "applied" -> "apply".
    if (stem->ends_with('i') && verbs.count(stem->substr(0, stem->size() - 1) + "y")) return true;
  }
  return false;
}

PosTag tag_token(const std::string& token, bool sentence_initial) {
  const std::string lower = ascii_lower(token);
  for (PosTag closed : {PosTag::PRON, PosTag::DET, PosTag::ADP, PosTag::CONJ}) {
    if (lexicon(closed).count(lower)) return closed;
  }
  bool has_alnum = false;
  bool all_digits = true;
  for (unsigned char c : token) {
    if (std::isalnum(c) || c >= 0x80 || c == '_') has_alnum = has_alnum || c != '_';
    if (!std::isdigit(c)) all_digits = false;
  }
  if (!has_alnum) return PosTag::OTHER;
  if (all_digits) return PosTag::NUM;
  const bool capitalized = std::isupper(static_cast<unsigned char>(token[0])) != 0;
  if (capitalized && !sentence_initial) return PosTag::PROPN;
  if (is_verb_form(lower)) return PosTag::VERB;
  if (lexicon(PosTag::ADV).count(lower)) return PosTag::ADV;
  if (lower.size() > 4 && lower.ends_with("ly")) return PosTag::ADV;
  if (lexicon(PosTag::ADJ).count(lower)) return PosTag::ADJ;
  return capitalized ? PosTag::PROPN : PosTag::NOUN;
}

json annotation_to_json(const EntityAnnotation& a) {
  json j;
  j["surface"] = a.mention.surface;
  j["start"] = a.mention.start;
  j["end"] = a.mention.end;
  j["entity_title"] = a.entity_title;
  j["rho"] = a.rho;
  j["types"] = a.entity_types;
  if (a.propagated) {
    j["propagated"] = {{"donor_tweet_id", a.propagated->donor_tweet_id},
                       {"donor_rho", a.propagated->donor_rho},
                       {"original_title", a.propagated->original_title},
                       {"original_rho", a.propagated->original_rho}};
  }
  return j;
}

EntityAnnotation annotation_from_json(const json& j) {
  EntityAnnotation a;
  a.mention.surface = j.at("surface").get<std::string>();
  a.mention.start = j.at("start").get<std::size_t>();
  a.mention.end = j.at("end").get<std::size_t>();
  a.entity_title = j.at("entity_title").get<std::string>();
  a.rho = j.at("rho").get<double>();
  if (auto it = j.find("types"); it != j.end())
    a.entity_types = it->get<std::set<std::string>>();
  if (auto it = j.find("propagated"); it != j.end() && !it->is_null()) {
    Provenance p;
    p.donor_tweet_id = it->at("donor_tweet_id").get<std::string>();
    p.donor_rho = it->at("donor_rho").get<double>();
    p.original_title = it->at("original_title").get<std::string>();
    p.original_rho = it->at("original_rho").get<double>();
    a.propagated = std::move(p);
  }
  if (a.entity_title.empty()) throw DataError("annotation with empty entity title");
  if (!(a.rho >= 0.0 && a.rho <= 1.0)) throw DataError("annotation rho outside [0, 1]");
  if (a.mention.start >= a.mention.end) throw DataError("annotation with empty span");
  return a;
}

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::NOUN: return "NOUN";
    case PosTag::PROPN: return "PROPN";
    case PosTag::PRON: return "PRON";
    case PosTag::VERB: return "VERB";
    case PosTag::ADJ: return "ADJ";
    case PosTag::ADV: return "ADV";
    case PosTag::DET: return "DET";
    case PosTag::ADP: return "ADP";
    case PosTag::CONJ: return "CONJ";
    case PosTag::NUM: return "NUM";
    case PosTag::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view s) {
  for (PosTag t : {PosTag::NOUN, PosTag::PROPN, PosTag::PRON, PosTag::VERB, PosTag::ADJ,
                   PosTag::ADV, PosTag::DET, PosTag::ADP, PosTag::CONJ, PosTag::NUM,
                   PosTag::OTHER}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::set<std::string> default_type_blacklist() {
  return {"Song",      "Album",        "Single",          "Book",
          "Film",      "Band",         "TelevisionShow",  "VideoGame",
          "Magazine",  "Newspaper",    "Play",            "Poem",
          "MusicalWork", "WrittenWork", "Artwork",        "ComicsCharacter",
          "FictionalCharacter", "Anime", "Manga",          "Website"};
}

void LinkerConfig::validate() const {
  if (!(rho_threshold > 0.0 && rho_threshold < 1.0))
    throw UsageError("linker rho threshold must lie in (0, 1), got " + format_double(rho_threshold));
}

// ---------------------------------------------------------------------------
// Fixture linker

FixtureLinker::FixtureLinker(std::vector<FixtureEntry> entries) {
  for (auto& e : entries) {
    if (e.entity_title.empty()) throw DataError("fixture entry '" + e.surface + "' has no title");
    if (!(e.rho >= 0.0 && e.rho <= 1.0))
      throw DataError("fixture entry '" + e.surface + "' has rho outside [0, 1]");
    auto key = surface_key(e.surface);
    if (key.empty()) throw DataError("fixture entry with empty surface");
    max_tokens_ = std::max(max_tokens_, key.size());
    std::string surface = e.surface;
    if (!by_tokens_.emplace(std::move(key), std::move(e)).second)
      throw DataError("duplicate fixture surface '" + surface + "'");
  }
}

FixtureLinker FixtureLinker::parse(std::string_view text, std::string_view source) {
  std::vector<FixtureEntry> entries;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    try {
      auto j = json::parse(line);
      FixtureEntry e;
      e.surface = j.at("surface").get<std::string>();
      e.entity_title = j.at("entity_title").get<std::string>();
      e.rho = j.at("rho").get<double>();
      if (auto it = j.find("types"); it != j.end()) e.types = it->get<std::set<std::string>>();
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return FixtureLinker(std::move(entries));
}

std::string serialize_fixtures(const std::vector<FixtureEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["surface"] = e.surface;
    j["entity_title"] = e.entity_title;
    j["rho"] = e.rho;
    j["types"] = e.types;
    out += j.dump() + "\n";
  }
  return out;
}

FixtureLinker FixtureLinker::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

Annotations FixtureLinker::link(const Tweet& tweet) const {
  Annotations out;
  const auto spans = tokenize_with_spans(tweet.clean_text);
  std::vector<std::string> lower;
  lower.reserve(spans.size());
  for (const auto& s : spans) lower.push_back(ascii_lower(s.text));

  std::size_t i = 0;
  while (i < spans.size()) {
    bool matched = false;
    for (std::size_t len = std::min(max_tokens_, spans.size() - i); len >= 1; --len) {
      std::vector<std::string> key(lower.begin() + static_cast<std::ptrdiff_t>(i),
                                   lower.begin() + static_cast<std::ptrdiff_t>(i + len));
      auto it = by_tokens_.find(key);
      if (it == by_tokens_.end()) continue;
      EntityAnnotation a;
      a.mention.start = spans[i].start;
      a.mention.end = spans[i + len - 1].end;
      a.mention.surface = cp_substr(tweet.clean_text, a.mention.start, a.mention.end);
      a.entity_title = it->second.entity_title;
      a.rho = it->second.rho;
      a.entity_types = it->second.types;
      out.push_back(std::move(a));
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Remote linker

RemoteLinker::RemoteLinker(RemoteLinkerConfig config) : config_(std::move(config)) {
  http_ = std::make_unique<HttpGetter>(config_.endpoint, config_.retry, config_.max_concurrency,
                                       config_.offline);
  if (!config_.cache_dir.empty()) cache_ = std::make_unique<DiskCache>(config_.cache_dir);
}

RemoteLinker::~RemoteLinker() = default;

Annotations RemoteLinker::link(const Tweet& tweet) const {
  if (tweet.clean_text.empty()) return {};
  const std::string key = "linker\n" + config_.endpoint + "\n" + config_.lang + "\n" +
                          tweet.clean_text;
  std::optional<std::string> body;
  if (cache_ && !config_.refresh) body = cache_->get(key);
  if (!body) {
    auto res = http_->get({{"text", tweet.clean_text},
                           {"gcube-token", config_.api_key},
                           {"lang", config_.lang}});
    if (res.status != 200)
      throw TransportError("linker returned HTTP " + std::to_string(res.status), 1);
    body = std::move(res.body);
    if (cache_) cache_->put(key, *body);
  }
  return parse_response(*body, tweet.clean_text);
}

Annotations RemoteLinker::parse_response(std::string_view body, std::string_view clean_text,
                                         Diagnostics* diag) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed linker response: ") + e.what());
  }
  Annotations out;
  auto it = j.find("annotations");
  if (it == j.end() || !it->is_array()) throw DataError("linker response has no annotations list");
  const std::u32string text = utf8_decode(clean_text);
  for (const auto& a : *it) {
    if (!a.is_object() || !a.contains("title") || !a["title"].is_string()) continue;
    EntityAnnotation ann;
    ann.entity_title = a["title"].get<std::string>();
    if (ann.entity_title.empty()) continue;
    ann.rho = a.value("rho", 0.0);
    if (!(ann.rho >= 0.0 && ann.rho <= 1.0)) {
      note(diag, "linker annotation '" + ann.entity_title + "' has rho outside [0, 1]");
      continue;
    }
    std::string spot = a.value("spot", a.value("surface", std::string{}));
    std::size_t start = a.value("start", std::size_t{0});
    std::size_t end = a.value("end", std::size_t{0});
    const std::u32string spot32 = utf8_decode(spot);
    if (start >= end || end > text.size() || text.compare(start, end - start, spot32) != 0) {
      auto found = spot32.empty() ? std::u32string::npos : text.find(spot32);
      if (found == std::u32string::npos) {
        note(diag, "linker span for '" + spot + "' does not match the text; dropped");
        continue;
      }
      start = found;
      end = found + spot32.size();
    }
    ann.mention = {utf8_encode(std::u32string_view(text).substr(start, end - start)), start, end};
    for (const char* field : {"types", "dbpedia_categories"}) {
      if (auto t = a.find(field); t != a.end() && t->is_array()) {
        for (const auto& v : *t) {
          if (v.is_string()) ann.entity_types.insert(v.get<std::string>());
        }
      }
    }
    out.push_back(std::move(ann));
  }
  return out;
}

// ---------------------------------------------------------------------------
// POS tagging

std::vector<PosTaggedToken> HeuristicPosTagger::tag(std::span<const std::string> tokens) const {
  std::vector<PosTaggedToken> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.push_back({tokens[i], tag_token(tokens[i], i == 0)});
  return out;
}

std::vector<PosTaggedToken> pos_tag(std::span<const std::string> tokens) {
  return HeuristicPosTagger{}.tag(tokens);
}

// ---------------------------------------------------------------------------
// Filters

ConfidenceSplit filter_by_confidence(const Annotations& anns, const LinkerConfig& cfg) {
  ConfidenceSplit split;
  for (const auto& a : anns) (a.rho >= cfg.rho_threshold ? split.kept : split.rejected).push_back(a);
  return split;
}

Annotations filter_by_type(const Annotations& anns, const LinkerConfig& cfg) {
  Annotations kept;
  for (const auto& a : anns) {
    bool blocked = std::any_of(a.entity_types.begin(), a.entity_types.end(),
                               [&](const std::string& t) { return cfg.type_blacklist.count(t) > 0; });
    if (!blocked) kept.push_back(a);
  }
  return kept;
}

Annotations filter_by_pos(const Annotations& anns, const Tweet& tweet,
                          std::span<const PosTaggedToken> tagged, const LinkerConfig& cfg,
                          Diagnostics* diag) {
  const auto spans = tokenize_with_spans(tweet.clean_text);
  if (spans.size() != tagged.size())
    throw DataError("tweet '" + tweet.id + "': " + std::to_string(tagged.size()) +
                    " POS tags for " + std::to_string(spans.size()) + " tokens");
  Annotations kept;
  for (const auto& a : anns) {
    bool overlaps = false;
    bool nominal = false;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (spans[i].start < a.mention.end && a.mention.start < spans[i].end) {
        overlaps = true;
        nominal = nominal || cfg.nominal_tags.count(tagged[i].tag) > 0;
      }
    }
    if (!overlaps) {
      note(diag, "tweet '" + tweet.id + "': mention '" + a.mention.surface +
                     "' overlaps no token; dropped");
      continue;
    }
    if (nominal) kept.push_back(a);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Propagation

std::map<std::string, Annotations> propagate(
    const std::map<std::string, ConfidenceSplit>& corpus_annotations, const LinkerConfig& cfg) {
  struct Donor {
    const std::string* tweet_id;
    const EntityAnnotation* ann;
    std::vector<std::string> key;
  };
  std::vector<Donor> donors;
  std::unordered_map<std::string, std::vector<std::size_t>> by_token;
  for (const auto& [id, split] : corpus_annotations) {
    for (const auto& a : split.kept) {
      if (a.rho < cfg.rho_threshold) continue;
      Donor d{&id, &a, surface_key(a.mention.surface)};
      std::unordered_set<std::string> seen;
      for (const auto& t : d.key) {
        if (seen.insert(t).second) by_token[t].push_back(donors.size());
      }
      donors.push_back(std::move(d));
    }
  }

  std::map<std::string, Annotations> out;
  for (const auto& [id, split] : corpus_annotations) {
    Annotations result = split.kept;
    for (const auto& r : split.rejected) {
      auto key = surface_key(r.mention.surface);
      if (key.empty()) continue;
      auto it = by_token.find(key.front());
      if (it == by_token.end()) continue;
      const Donor* best = nullptr;
      for (std::size_t idx : it->second) {
        const Donor& d = donors[idx];
        if (*d.tweet_id == id || !contains_run(d.key, key)) continue;
        if (!best || d.ann->rho > best->ann->rho ||
            (d.ann->rho == best->ann->rho &&
             std::tie(d.ann->entity_title, *d.tweet_id) <
                 std::tie(best->ann->entity_title, *best->tweet_id))) {
          best = &d;
        }
      }
      if (!best) continue;
      EntityAnnotation relinked = r;
      relinked.entity_title = best->ann->entity_title;
      relinked.entity_types = best->ann->entity_types;
      relinked.propagated = Provenance{*best->tweet_id, best->ann->rho, r.entity_title, r.rho};
      result.push_back(std::move(relinked));
    }
    std::stable_sort(result.begin(), result.end(), by_span);
    out.emplace(id, std::move(result));
  }
  return out;
}

std::map<std::string, Annotations> refine(const Corpus& corpus, const Linker& linker,
                                          const PosTagger& tagger, const LinkerConfig& cfg,
                                          Diagnostics* diag, RefineOptions options) {
  cfg.validate();
  std::vector<ConfidenceSplit> splits(corpus.tweets.size());
  parallel_for(corpus.tweets.size(), options.max_concurrency, [&](std::size_t i) {
    const Tweet& tweet = corpus.tweets[i].tweet;
    Annotations linked;
    try {
      linked = linker.link(tweet);
    } catch (const TransportError& e) {
      throw TransportError("linking tweet '" + tweet.id + "': " + e.what(), e.attempts());
    } catch (const DataError& e) {
      throw DataError("linking tweet '" + tweet.id + "': " + e.what());
    }
    const auto tagged = tagger.tag(tweet.tokens);
    auto split = filter_by_confidence(linked, cfg);
    split.kept = filter_by_pos(filter_by_type(split.kept, cfg), tweet, tagged, cfg, diag);
    // A rejected mention is only worth relinking if it looks like a name.
    split.rejected = filter_by_pos(split.rejected, tweet, tagged, cfg, diag);
    splits[i] = std::move(split);
  });

  std::map<std::string, ConfidenceSplit> by_id;
  for (std::size_t i = 0; i < corpus.tweets.size(); ++i)
    by_id.emplace(corpus.tweets[i].tweet.id, std::move(splits[i]));
  return propagate(by_id, cfg);
}

// ---------------------------------------------------------------------------
// Persistence

std::string serialize_annotations(const std::map<std::string, Annotations>& anns) {
  std::string out;
  for (const auto& [id, list] : anns) {
    json j;
    j["id"] = id;
    j["annotations"] = json::array();
    for (const auto& a : list) j["annotations"].push_back(annotation_to_json(a));
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::map<std::string, Annotations> parse_annotations(std::string_view text,
                                                     std::string_view source) {
  std::map<std::string, Annotations> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    try {
      auto j = json::parse(line);
      auto id = j.at("id").get<std::string>();
      Annotations list;
      for (const auto& a : j.at("annotations")) list.push_back(annotation_from_json(a));
      if (!out.emplace(id, std::move(list)).second) throw DataError("duplicate id '" + id + "'");
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  });
  return out;
}

}  // namespace moralkb
