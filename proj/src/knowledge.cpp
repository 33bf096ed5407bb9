#include "moralkb/knowledge.hpp"

#include <algorithm>

#include "json.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/parallel.hpp"
#include "moralkb/text.hpp"

namespace moralkb {

namespace {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

constexpr std::string_view kMissingMarker = "{\"missing\":true}";

KBEntity entity_from(const json& j) {
  KBEntity e;
  e.title = j.at("title").get<std::string>();
  if (e.title.empty()) throw DataError("entity with empty title");
  e.abstract = j.value("abstract", std::string{});
  if (auto it = j.find("properties"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw DataError("properties of '" + e.title + "' must be an object");
    for (auto p = it->begin(); p != it->end(); ++p) {
      std::vector<std::string> values;
      if (p.value().is_string()) {
        values.push_back(p.value().get<std::string>());
      } else {
        values = p.value().get<std::vector<std::string>>();
      }
      e.properties.emplace(p.key(), std::move(values));
    }
  }
  if (auto it = j.find("types"); it != j.end() && !it->is_null())
    e.types = it->get<std::set<std::string>>();
  return e;
}

}  // namespace

void PropertyWhitelist::validate() const {
  if (names.empty()) throw UsageError("property whitelist is empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw UsageError("property '" + n + "' listed twice");
  }
}

std::string entity_to_json(const KBEntity& e) {
  ordered_json j;
  j["title"] = e.title;
  j["abstract"] = e.abstract;
  j["properties"] = ordered_json::object();
  for (const auto& [k, v] : e.properties) j["properties"][k] = v;
  j["types"] = e.types;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

KBEntity entity_from_json(std::string_view text) {
  try {
    return entity_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed entity record: ") + e.what());
  }
}

std::string serialize_snapshot(const std::vector<KBEntity>& entities) {
  std::string out;
  for (const auto& e : entities) out += entity_to_json(e) + "\n";
  return out;
}

SnapshotKnowledgeBase::SnapshotKnowledgeBase(std::vector<KBEntity> entities) {
  for (auto& e : entities) {
    std::string title = e.title;
    if (!entities_.emplace(title, std::move(e)).second)
      throw DataError("duplicate entity '" + title + "' in snapshot");
  }
}

SnapshotKnowledgeBase SnapshotKnowledgeBase::parse(std::string_view text, std::string_view source) {
  std::vector<KBEntity> entities;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    try {
      entities.push_back(entity_from(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  });
  return SnapshotKnowledgeBase(std::move(entities));
}

SnapshotKnowledgeBase SnapshotKnowledgeBase::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::optional<KBEntity> SnapshotKnowledgeBase::fetch(const std::string& title) const {
  auto it = entities_.find(title);
  if (it == entities_.end()) return std::nullopt;
  return it->second;
}

RemoteKnowledgeBase::RemoteKnowledgeBase(RemoteKnowledgeBaseConfig config)
    : http_(std::make_unique<HttpGetter>(std::move(config.endpoint), config.retry,
                                         config.max_concurrency, config.offline)) {}

RemoteKnowledgeBase::~RemoteKnowledgeBase() = default;

std::optional<KBEntity> RemoteKnowledgeBase::fetch(const std::string& title) const {
  auto res = http_->get({{"title", title}});
  if (res.status == 404) return std::nullopt;
  if (res.status != 200)
    throw TransportError("knowledge base returned HTTP " + std::to_string(res.status), 1);
  auto e = entity_from_json(res.body);
  if (e.title != title)
    throw DataError("knowledge base answered '" + e.title + "' for '" + title + "'");
  return e;
}

CachedKnowledgeBase::CachedKnowledgeBase(std::unique_ptr<KnowledgeBase> inner,
                                         std::filesystem::path dir, bool refresh)
    : inner_(std::move(inner)), cache_(std::move(dir)), refresh_(refresh) {}

std::optional<KBEntity> CachedKnowledgeBase::fetch(const std::string& title) const {
  const std::string key = "entity\n" + title;
  if (!refresh_) {
    if (auto hit = cache_.get(key)) {
      if (*hit == kMissingMarker) return std::nullopt;
      return entity_from_json(*hit);
    }
  }
  auto e = inner_->fetch(title);
  cache_.put(key, e ? entity_to_json(*e) : std::string(kMissingMarker));
  return e;
}

KnowledgeDoc merge_document(const KBEntity& entity, const PropertyWhitelist& wl) {
  std::vector<std::string> parts;
  if (!entity.abstract.empty()) parts.push_back(entity.abstract);
  for (const auto& name : wl.names) {
    auto it = entity.properties.find(name);
    if (it == entity.properties.end()) continue;
    for (const auto& v : it->second) {
      if (!v.empty()) parts.push_back(v);
    }
  }
  KnowledgeDoc doc;
  doc.entity_title = entity.title;
  doc.text = join(parts, ". ");
  doc.tokens = tokenize(normalize_text(doc.text));
  return doc;
}

std::map<std::string, std::vector<KnowledgeDoc>> enrich_corpus(
    const std::map<std::string, Annotations>& refined, const KnowledgeBase& kb,
    const PropertyWhitelist& wl, Diagnostics* diag, EnrichOptions options) {
  wl.validate();
  std::vector<std::string> titles;
  {
    std::set<std::string> seen;
    for (const auto& [id, anns] : refined) {
      for (const auto& a : anns) {
        if (seen.insert(a.entity_title).second) titles.push_back(a.entity_title);
      }
    }
  }
  std::vector<std::optional<KnowledgeDoc>> docs(titles.size());
  parallel_for(titles.size(), options.max_concurrency, [&](std::size_t i) {
    std::optional<KBEntity> e;
    try {
      e = kb.fetch(titles[i]);
    } catch (const TransportError& err) {
      throw TransportError("fetching '" + titles[i] + "': " + err.what(), err.attempts());
    }
    if (e) docs[i] = merge_document(*e, wl);
  });
  std::map<std::string, const KnowledgeDoc*> by_title;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (docs[i])
      by_title.emplace(titles[i], &*docs[i]);
    else
      note(diag, "entity '" + titles[i] + "' not found in knowledge base; skipped");
  }

  std::map<std::string, std::vector<KnowledgeDoc>> out;
  for (const auto& [id, anns] : refined) {
    std::vector<KnowledgeDoc> list;
    std::set<std::string> seen;
    for (const auto& a : anns) {
      if (!seen.insert(a.entity_title).second) continue;
      auto it = by_title.find(a.entity_title);
      if (it != by_title.end()) list.push_back(*it->second);
    }
    out.emplace(id, std::move(list));
  }
  return out;
}

std::string serialize_knowledge(const std::map<std::string, std::vector<KnowledgeDoc>>& docs) {
  std::string out;
  for (const auto& [id, list] : docs) {
    ordered_json j;
    j["id"] = id;
    j["docs"] = ordered_json::array();
    for (const auto& d : list) j["docs"].push_back({{"entity_title", d.entity_title}, {"text", d.text}});
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::map<std::string, std::vector<KnowledgeDoc>> parse_knowledge(std::string_view text,
                                                                 std::string_view source) {
  std::map<std::string, std::vector<KnowledgeDoc>> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    try {
      auto j = json::parse(line);
      auto id = j.at("id").get<std::string>();
      std::vector<KnowledgeDoc> list;
      for (const auto& d : j.at("docs")) {
        KnowledgeDoc doc;
        doc.entity_title = d.at("entity_title").get<std::string>();
        doc.text = d.at("text").get<std::string>();
        doc.tokens = tokenize(normalize_text(doc.text));
        list.push_back(std::move(doc));
      }
      if (!out.emplace(id, std::move(list)).second) throw DataError("duplicate id '" + id + "'");
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  });
  return out;
}

std::map<std::string, std::vector<std::string>> knowledge_tokens(
    const std::map<std::string, std::vector<KnowledgeDoc>>& docs) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [id, list] : docs) {
    auto& tokens = out[id];
    for (const auto& d : list) tokens.insert(tokens.end(), d.tokens.begin(), d.tokens.end());
  }
  return out;
}

}  // namespace moralkb
