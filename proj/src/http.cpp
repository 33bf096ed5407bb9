#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "moralkb/http.hpp"

#include <thread>

#include "httplib.h"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"

namespace moralkb {

ParsedUrl parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw UsageError("endpoint '" + std::string(url) + "' has no scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw UsageError("endpoint '" + std::string(url) + "' must be http or https");
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  ParsedUrl out;
  auto host = rest.substr(0, slash);
  if (host.empty()) throw UsageError("endpoint '" + std::string(url) + "' has no host");
  out.origin = std::string(scheme) + "://" + std::string(host);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  return out;
}

HttpGetter::HttpGetter(std::string endpoint, HttpRetryPolicy retry, std::size_t max_concurrency,
                       bool offline)
    : endpoint_(std::move(endpoint)),
      url_(parse_url(endpoint_)),
      retry_(retry),
      offline_(offline),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_concurrency, 1, 64))) {
  if (retry_.attempts < 1) throw UsageError("retry attempts must be at least 1");
}

HttpResponse HttpGetter::get(const std::vector<std::pair<std::string, std::string>>& params) const {
  if (offline_) throw TransportError("offline mode forbids requests to " + endpoint_, 0);

  httplib::Params query;
  for (const auto& [k, v] : params) query.emplace(k, v);

  auto backoff = retry_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
      } release{slots_};

      httplib::Client client(url_.origin);
      client.set_connection_timeout(std::chrono::seconds(10));
      client.set_read_timeout(std::chrono::seconds(30));
      auto res = client.Get(url_.path, query, httplib::Headers{});
      if (!res) {
        last_error = "request to " + endpoint_ + " failed: " + httplib::to_string(res.error());
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "request to " + endpoint_ + " returned HTTP " + std::to_string(res->status);
      } else {
        return {res->status, res->body};
      }
    }
    if (attempt < retry_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
    }
  }
  throw TransportError(last_error, retry_.attempts);
}

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path DiskCache::path_for(std::string_view key) const {
  return dir_ / (sha256_hex(key) + ".cache");
}

std::optional<std::string> DiskCache::get(std::string_view key) const {
  auto p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  return read_file(p);
}

void DiskCache::put(std::string_view key, std::string_view value) const {
  write_file_atomic(path_for(key), value);
}

}  // namespace moralkb
