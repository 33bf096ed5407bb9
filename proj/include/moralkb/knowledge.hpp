#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "moralkb/diagnostics.hpp"
#include "moralkb/http.hpp"
#include "moralkb/linking.hpp"

namespace moralkb {

struct KBEntity {
  std::string title;
  std::string abstract;
  /// Property name -> values in fetched order.
  std::map<std::string, std::vector<std::string>> properties;
  std::set<std::string> types;

  friend bool operator==(const KBEntity&, const KBEntity&) = default;
};

struct PropertyWhitelist {
  std::vector<std::string> names = {"purpose", "office", "background", "meaning",
                                    "orderInOffice", "seniority", "title", "role"};

  /// Throws UsageError when empty or when a name repeats.
  void validate() const;
};

struct KnowledgeDoc {
  std::string entity_title;
  std::string text;
  std::vector<std::string> tokens;

  friend bool operator==(const KnowledgeDoc&, const KnowledgeDoc&) = default;
};

/// Source of entity records. fetch() returns nullopt when the entity does
/// not exist; transport problems throw TransportError. Implementations must
/// be safe to call concurrently.
class KnowledgeBase {
 public:
  virtual ~KnowledgeBase() = default;
  virtual std::optional<KBEntity> fetch(const std::string& title) const = 0;
};

/// Local snapshot: line-delimited {"title", "abstract", "properties",
/// "types"} records. The same record format is what the remote client
/// expects from its endpoint.
class SnapshotKnowledgeBase final : public KnowledgeBase {
 public:
  explicit SnapshotKnowledgeBase(std::vector<KBEntity> entities);
  static SnapshotKnowledgeBase load(const std::filesystem::path& path);
  static SnapshotKnowledgeBase parse(std::string_view text, std::string_view source = "snapshot");

  std::optional<KBEntity> fetch(const std::string& title) const override;
  std::size_t size() const { return entities_.size(); }

 private:
  std::map<std::string, KBEntity> entities_;
};

struct RemoteKnowledgeBaseConfig {
  std::string endpoint;
  HttpRetryPolicy retry;
  std::size_t max_concurrency = 4;
  bool offline = false;
};

/// GET endpoint?title=... returning one snapshot-format record; HTTP 404
/// means the entity does not exist.
class RemoteKnowledgeBase final : public KnowledgeBase {
 public:
  explicit RemoteKnowledgeBase(RemoteKnowledgeBaseConfig config);
  ~RemoteKnowledgeBase() override;
  std::optional<KBEntity> fetch(const std::string& title) const override;

 private:
  std::unique_ptr<HttpGetter> http_;
};

/// Write-through disk cache keyed by entity title. Misses are cached too, so
/// repeated runs see the same answer. `refresh` ignores existing entries.
class CachedKnowledgeBase final : public KnowledgeBase {
 public:
  CachedKnowledgeBase(std::unique_ptr<KnowledgeBase> inner, std::filesystem::path dir,
                      bool refresh = false);
  std::optional<KBEntity> fetch(const std::string& title) const override;

 private:
  std::unique_ptr<KnowledgeBase> inner_;
  DiskCache cache_;
  bool refresh_;
};

std::string entity_to_json(const KBEntity& e);
KBEntity entity_from_json(std::string_view text);
/// One entity_to_json() record per line, the format SnapshotKnowledgeBase reads.
std::string serialize_snapshot(const std::vector<KBEntity>& entities);

/// Abstract first, then whitelisted property values in whitelist order,
/// joined by ". ". Tokens follow tweet normalization.
KnowledgeDoc merge_document(const KBEntity& entity, const PropertyWhitelist& wl);

struct EnrichOptions {
  std::size_t max_concurrency = 4;
};

/// One document per distinct entity per tweet, in first-mention order.
/// Entities the KB does not know are skipped and noted.
std::map<std::string, std::vector<KnowledgeDoc>> enrich_corpus(
    const std::map<std::string, Annotations>& refined, const KnowledgeBase& kb,
    const PropertyWhitelist& wl, Diagnostics* diag = nullptr, EnrichOptions options = {});

/// Line-delimited {"id", "docs": [{"entity_title", "text"}]}; tokens are
/// recomputed from the text on load.
std::string serialize_knowledge(const std::map<std::string, std::vector<KnowledgeDoc>>& docs);
std::map<std::string, std::vector<KnowledgeDoc>> parse_knowledge(
    std::string_view text, std::string_view source = "knowledge");

/// Concatenated tokens of all documents of each tweet.
std::map<std::string, std::vector<std::string>> knowledge_tokens(
    const std::map<std::string, std::vector<KnowledgeDoc>>& docs);

}  // namespace moralkb
