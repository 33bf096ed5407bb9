#include "moralkb/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/text.hpp"

namespace moralkb {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <class T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size())
    throw DataError("cosine: vector lengths differ (" + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()) + ")");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    nu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
    nv += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

EmbeddingTable parse_embedding_stream(std::istream& in, std::string_view source) {
  auto fail = [&](std::size_t line_no, const std::string& msg) -> DataError {
    return DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  ++line_no;
  auto header = split_spaces(line);
  std::size_t vocab = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], vocab) || !parse_number(header[1], dim) ||
      dim == 0)
    throw fail(line_no, "header must be 'V D' with D > 0");

  EmbeddingTable table(dim);
  std::vector<float> vec(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_spaces(line);
    if (fields.size() != dim + 1)
      throw fail(line_no, "expected word and " + std::to_string(dim) + " values, found " +
                              std::to_string(fields.size() - 1) + " values");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_number(fields[k + 1], vec[k]) || !std::isfinite(vec[k]))
        throw fail(line_no, "bad number '" + std::string(fields[k + 1]) + "'");
    }
    if (table.find(fields[0])) throw fail(line_no, "duplicate word '" + std::string(fields[0]) + "'");
    table.add(std::string(fields[0]), vec);
  }
  if (table.size() != vocab)
    throw fail(line_no, "header declares " + std::to_string(vocab) + " words, file has " +
                            std::to_string(table.size()));
  return table;
}

}  // namespace

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingTable::add(std::string word, std::span<const float> vec) {
  if (vec.size() != dim_)
    throw DataError("embedding for '" + word + "' has length " + std::to_string(vec.size()) +
                    ", expected " + std::to_string(dim_));
  if (index_.count(word)) throw DataError("duplicate embedding word '" + word + "'");
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::optional<std::span<const float>> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return std::span<const float>(data_.data() + it->second * dim_, dim_);
}

std::optional<std::span<const float>> EmbeddingTable::lookup(std::string_view word) const {
  if (auto v = find(word)) return v;
  auto lower = ascii_lower(word);
  if (lower != word) return find(lower);
  return std::nullopt;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_embedding_stream(in, path.string());
}

EmbeddingTable parse_embeddings(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  return parse_embedding_stream(in, source);
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (const auto& w : table.words()) {
    out += w;
    const auto vec = *table.find(w);
    for (float x : vec) {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof buf, x);
      out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

double cosine(std::span<const float> u, std::span<const float> v) { return cosine_impl(u, v); }
double cosine(std::span<const double> u, std::span<const double> v) { return cosine_impl(u, v); }

// ---------------------------------------------------------------------------
// MFD

bool MFDictionary::matches(std::size_t category, std::string_view lower_token) const {
  for (const auto& e : entries) {
    if (e.category != category) continue;
    if (e.pattern.back() == '*') {
      if (lower_token.starts_with(std::string_view(e.pattern).substr(0, e.pattern.size() - 1)))
        return true;
    } else if (lower_token == e.pattern) {
      return true;
    }
  }
  return false;
}

MFDictionary parse_mfd(std::string_view text, std::string_view source) {
  MFDictionary dict;
  std::map<std::string, std::size_t> index;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto tab = line.find('\t');
    auto pattern = tab == std::string_view::npos ? std::string_view{} : line.substr(0, tab);
    auto category = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
    if (pattern.empty() || category.empty() || pattern == "*")
      throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                      ": expected 'pattern<TAB>category'");
    auto [it, inserted] = index.emplace(std::string(category), dict.categories.size());
    if (inserted) dict.categories.emplace_back(category);
    dict.entries.push_back({ascii_lower(pattern), it->second});
  });
  return dict;
}

std::string serialize_mfd(const MFDictionary& dict) {
  std::string out;
  for (const auto& e : dict.entries) out += e.pattern + "\t" + dict.categories.at(e.category) + "\n";
  return out;
}

MFDictionary load_mfd(const std::filesystem::path& path) {
  return parse_mfd(read_file(path), path.string());
}

std::vector<double> mfd_vector(std::span<const std::string> tokens, const MFDictionary& dict) {
  std::vector<double> out(dict.categories.size(), 0.0);
  for (const auto& t : tokens) {
    const auto lower = ascii_lower(t);
    for (std::size_t c = 0; c < out.size(); ++c) {
      if (dict.matches(c, lower)) out[c] += 1.0;
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, tokens.size()));
  for (auto& x : out) x /= n;
  return out;
}

// ---------------------------------------------------------------------------
// cPMId

void CpmidConfig::validate() const {
  if (!(delta > 0.0 && delta <= 1.0))
    throw UsageError("cpmid delta must lie in (0, 1], got " + format_double(delta));
  if (k < 1) throw UsageError("feature count k must be at least 1");
}

double cpmid_from_counts(const CooccurrenceCounts& c, double delta) {
  if (c.with_word == 0) throw DataError("word not in corpus");
  if (c.word_positive == 0) return -std::numeric_limits<double>::infinity();
  const double d = static_cast<double>(c.docs);
  const double dw = static_cast<double>(c.with_word);
  const double df = static_cast<double>(c.positive);
  const double significance = std::sqrt(dw) * std::sqrt(std::log(1.0 / delta) / 2.0);
  return std::log2(static_cast<double>(c.word_positive) / (dw * df / d + significance));
}

double document_pmi(const CooccurrenceCounts& c) {
  if (c.with_word == 0) throw DataError("word not in corpus");
  if (c.word_positive == 0) return -std::numeric_limits<double>::infinity();
  return std::log2(static_cast<double>(c.word_positive) * static_cast<double>(c.docs) /
                   (static_cast<double>(c.with_word) * static_cast<double>(c.positive)));
}

DocumentIndex::DocumentIndex(std::span<const LabelledDoc> docs) {
  std::unordered_set<std::string> seen;
  for (const auto& doc : docs) {
    ++docs_;
    if (doc.positive) ++positive_;
    seen.clear();
    for (const auto& t : doc.tokens) {
      auto lower = ascii_lower(t);
      if (!seen.insert(lower).second) continue;
      auto& f = freq_[lower];
      ++f.df;
      if (doc.positive) ++f.df_positive;
    }
  }
}

CooccurrenceCounts DocumentIndex::counts(std::string_view word) const {
  CooccurrenceCounts c{docs_, 0, positive_, 0};
  auto it = freq_.find(ascii_lower(word));
  if (it != freq_.end()) {
    c.with_word = it->second.df;
    c.word_positive = it->second.df_positive;
  }
  return c;
}

std::vector<std::string> DocumentIndex::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(freq_.size());
  for (const auto& [w, f] : freq_) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

double cpmid(std::string_view word, std::span<const LabelledDoc> docs, const CpmidConfig& cfg) {
  cfg.validate();
  if (docs.empty()) throw DataError("cpmid needs at least one document");
  return cpmid_from_counts(DocumentIndex(docs).counts(word), cfg.delta);
}

FoundationFeatureSet select_features(std::span<const LabelledDoc> docs, MoralClass target,
                                     const CpmidConfig& cfg) {
  cfg.validate();
  DocumentIndex index(docs);
  if (index.positive_docs() == 0) throw DataError("no positive class");
  FoundationFeatureSet fs;
  fs.target = target;
  for (const auto& w : index.vocabulary()) {
    auto c = index.counts(w);
    if (c.with_word < cfg.min_df || c.word_positive == 0) continue;
    fs.features.emplace_back(w, cpmid_from_counts(c, cfg.delta));
  }
  std::stable_sort(fs.features.begin(), fs.features.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (fs.features.size() > cfg.k) fs.features.resize(cfg.k);
  return fs;
}

FoundationFeatureSet select_features(const std::map<std::string, std::vector<std::string>>& docs,
                                     const std::map<std::string, LabelSet>& gold,
                                     MoralClass target, const CpmidConfig& cfg) {
  std::vector<LabelledDoc> labelled;
  for (const auto& [id, tokens] : docs) {
    auto it = gold.find(id);
    if (it == gold.end()) continue;
    labelled.push_back({tokens, it->second.get(target)});
  }
  return select_features(labelled, target, cfg);
}

std::string serialize_feature_set(const FoundationFeatureSet& fs) {
  std::string out;
  for (const auto& [w, s] : fs.features) out += w + "\t" + format_double(s) + "\n";
  return out;
}

FoundationFeatureSet parse_feature_set(std::string_view text, MoralClass target,
                                       std::string_view source) {
  FoundationFeatureSet fs;
  fs.target = target;
  std::set<std::string> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto fail = [&](const std::string& msg) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) fail("expected 'word<TAB>score'");
    double score = 0;
    if (!parse_number(line.substr(tab + 1), score) || !std::isfinite(score)) fail("bad score");
    std::string word(line.substr(0, tab));
    if (!seen.insert(word).second) fail("duplicate word '" + word + "'");
    if (!fs.features.empty() && score > fs.features.back().second) fail("scores not descending");
    fs.features.emplace_back(std::move(word), score);
  });
  return fs;
}

// ---------------------------------------------------------------------------
// Soft encoding

void SoftEncoderConfig::validate() const {
  if (!(theta >= -1.0 && theta <= 1.0))
    throw UsageError("soft encoder threshold must lie in [-1, 1], got " + format_double(theta));
}

std::vector<double> soft_encode(std::span<const std::string> tokens, const FoundationFeatureSet& fs,
                                const EmbeddingTable& emb, const SoftEncoderConfig& cfg) {
  std::vector<double> out(fs.features.size(), 0.0);
  if (tokens.empty() || fs.features.empty()) return out;

  std::vector<std::optional<std::span<const float>>> feature_vecs;
  feature_vecs.reserve(fs.features.size());
  for (const auto& [w, s] : fs.features) feature_vecs.push_back(emb.lookup(w));

  // Distinct tokens are scored once and weighted by their count.
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  for (const auto& [token, n] : counts) {
    const auto lower = ascii_lower(token);
    const auto vec = emb.lookup(token);
    for (std::size_t i = 0; i < fs.features.size(); ++i) {
      bool hit = lower == ascii_lower(fs.features[i].first);
      if (!hit && vec && feature_vecs[i]) hit = cosine(*feature_vecs[i], *vec) >= cfg.theta;
      if (hit) out[i] += static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace moralkb
