#pragma once

// Minimal HTTP plumbing for the remote linker and knowledge-base clients:
// retried GETs with bounded concurrency, and a content-addressed disk cache.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace moralkb {

struct HttpRetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

/// Throws UsageError for anything that is not http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

/// Issues GET requests with exponential backoff. Connection failures, 429 and
/// 5xx answers are retried; any other status is returned to the caller.
/// At most `max_concurrency` requests are in flight at once.
class HttpGetter {
 public:
  HttpGetter(std::string endpoint, HttpRetryPolicy retry, std::size_t max_concurrency,
             bool offline = false);

  /// Throws TransportError after the last failed attempt, or immediately
  /// when offline.
  HttpResponse get(const std::vector<std::pair<std::string, std::string>>& params) const;

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  ParsedUrl url_;
  HttpRetryPolicy retry_;
  bool offline_;
  mutable std::counting_semaphore<64> slots_;
};

/// Directory of files named by the SHA-256 of their key. Each entry is
/// written atomically, so concurrent readers see either nothing or a
/// complete value.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  std::optional<std::string> get(std::string_view key) const;
  void put(std::string_view key, std::string_view value) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(std::string_view key) const;
  std::filesystem::path dir_;
};

}  // namespace moralkb
