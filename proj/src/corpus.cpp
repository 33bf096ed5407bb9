#include "moralkb/corpus.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/text.hpp"

namespace moralkb {

namespace {

constexpr std::array<std::string_view, 6> kKeyNames = {
    "care_harm", "fairness_cheating", "loyalty_betrayal", "authority_subversion",
    "purity_degradation", "non_moral"};
constexpr std::array<std::string_view, 6> kDisplayNames = {
    "Care/Harm", "Fairness/Cheating", "Loyalty/Betrayal", "Authority/Subversion",
    "Purity/Degradation", "Non-moral"};

using ordered_json = nlohmann::ordered_json;

ordered_json labels_to_json(const LabelSet& l) {
  ordered_json j = ordered_json::object();
  for (auto c : kMoralClasses) j[std::string(key_name(c))] = l.get(c);
  return j;
}

LabelSet labels_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("label set must be an object");
  LabelSet l;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto c = parse_class(it.key());
    if (!c) throw DataError("unknown label key '" + it.key() + "'");
    const auto& v = it.value();
    if (v.is_boolean()) {
      l.set(*c, v.get<bool>());
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      l.set(*c, v.get<int>() == 1);
    } else {
      throw DataError("label '" + it.key() + "' must be boolean or 0/1");
    }
  }
  return l;
}

const std::string& require_string(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw DataError(std::string("missing or non-string field '") + field + "'");
  return it->get_ref<const std::string&>();
}

}  // namespace

std::string_view display_name(MoralClass c) { return kDisplayNames[index_of(c)]; }
std::string_view key_name(MoralClass c) { return kKeyNames[index_of(c)]; }

std::optional<MoralClass> parse_class(std::string_view s) {
  for (auto c : kMoralClasses) {
    if (s == key_name(c) || s == display_name(c)) return c;
  }
  return std::nullopt;
}

bool LabelSet::get(MoralClass c) const {
  return c == MoralClass::NonMoral ? non_moral : foundations[index_of(c)];
}

void LabelSet::set(MoralClass c, bool value) {
  if (c == MoralClass::NonMoral)
    non_moral = value;
  else
    foundations[index_of(c)] = value;
}

bool LabelSet::consistent() const { return non_moral == derive_non_moral(*this); }

bool derive_non_moral(const LabelSet& labels) {
  for (bool b : labels.foundations) {
    if (b) return false;
  }
  return true;
}

LabelSet majority_vote(const std::vector<LabelSet>& coder_labels) {
  if (coder_labels.empty()) throw DataError("no coders");
  LabelSet out;
  const std::size_t n = coder_labels.size();
  for (auto c : kMoralClasses) {
    std::size_t votes = 0;
    for (const auto& l : coder_labels) votes += l.get(c) ? 1 : 0;
    out.set(c, 2 * votes > n);
  }
  return out;
}

double pabak(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size())
    throw DataError("pabak: rater lists differ in length (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw DataError("pabak: no items");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i] ? 1 : 0;
  const double p_o = static_cast<double>(agree) / static_cast<double>(a.size());
  return 2.0 * p_o - 1.0;
}

Tweet Tweet::from_raw(std::string id, std::string raw) {
  std::string clean = normalize_text(raw);
  return from_clean(std::move(id), std::move(raw), std::move(clean));
}

Tweet Tweet::from_clean(std::string id, std::string raw, std::string clean) {
  Tweet t;
  t.id = std::move(id);
  t.raw_text = std::move(raw);
  t.clean_text = std::move(clean);
  t.tokens = tokenize(t.clean_text);
  return t;
}

void Corpus::check_unique_ids() const {
  std::set<std::string_view> seen;
  for (const auto& t : tweets) {
    if (!seen.insert(t.tweet.id).second) throw DataError("duplicate tweet id '" + t.tweet.id + "'");
  }
}

const AnnotatedTweet* Corpus::find(std::string_view id) const {
  for (const auto& t : tweets) {
    if (t.tweet.id == id) return &t;
  }
  return nullptr;
}

ClassStats class_stats(const Corpus& corpus, MoralClass c) {
  std::vector<std::string> missing;
  ClassStats s;
  for (const auto& t : corpus.tweets) {
    if (!t.gold) {
      missing.push_back(t.tweet.id);
      continue;
    }
    if (t.gold->get(c))
      ++s.pos;
    else
      ++s.neg;
  }
  if (!missing.empty()) throw DataError("tweets without gold labels: " + join(missing, ", "));
  s.ratio = s.neg > 0 ? static_cast<double>(s.pos) / static_cast<double>(s.neg)
                      : std::numeric_limits<double>::infinity();
  return s;
}

Corpus with_majority_gold(Corpus corpus) {
  for (auto& t : corpus.tweets) {
    if (!t.gold && !t.coder_labels.empty()) t.gold = majority_vote(t.coder_labels);
  }
  return corpus;
}

Corpus parse_corpus(std::string_view text, std::string topic, std::string_view source) {
  Corpus corpus;
  corpus.topic = std::move(topic);
  std::set<std::string> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto fail = [&](const std::string& msg) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) fail("record is not an object");
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "id" && k != "raw_text" && k != "clean_text" && k != "coder_labels" && k != "gold")
          fail("unknown field '" + k + "'");
      }
      AnnotatedTweet at;
      std::string id = require_string(j, "id");
      std::string raw = require_string(j, "raw_text");
      if (auto it = j.find("clean_text"); it != j.end()) {
        if (!it->is_string()) fail("clean_text must be a string");
        at.tweet = Tweet::from_clean(std::move(id), std::move(raw), it->get<std::string>());
      } else {
        at.tweet = Tweet::from_raw(std::move(id), std::move(raw));
      }
      if (auto it = j.find("coder_labels"); it != j.end()) {
        if (!it->is_array()) fail("coder_labels must be a list");
        for (const auto& l : *it) at.coder_labels.push_back(labels_from_json(l));
      }
      if (auto it = j.find("gold"); it != j.end() && !it->is_null()) {
        at.gold = labels_from_json(*it);
        if (!at.coder_labels.empty() && *at.gold != majority_vote(at.coder_labels))
          fail("gold labels of '" + at.tweet.id + "' disagree with the coder majority vote");
      }
      if (!seen.insert(at.tweet.id).second) fail("duplicate tweet id '" + at.tweet.id + "'");
      corpus.tweets.push_back(std::move(at));
    } catch (const DataError& e) {
      std::string msg = e.what();
      if (msg.rfind(std::string(source) + ":", 0) == 0) throw;
      fail(msg);
    }
  });
  return corpus;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& t : corpus.tweets) {
    ordered_json j;
    j["id"] = t.tweet.id;
    j["raw_text"] = t.tweet.raw_text;
    j["clean_text"] = t.tweet.clean_text;
    j["coder_labels"] = ordered_json::array();
    for (const auto& l : t.coder_labels) j["coder_labels"].push_back(labels_to_json(l));
    if (t.gold) j["gold"] = labels_to_json(*t.gold);
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path, std::optional<std::string> topic) {
  return parse_corpus(read_file(path), topic ? *topic : path.stem().string(), path.string());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

}  // namespace moralkb
