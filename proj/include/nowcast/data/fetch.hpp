// Copyright 2026 The Nowcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOWCAST_DATA_FETCH_HPP
#define NOWCAST_DATA_FETCH_HPP

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/config.hpp"
#include "nowcast/data/frame.hpp"

namespace nowcast::data {

/// The server rejected the credential (HTTP 401/403) or none was supplied.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// A request kept failing (timeouts, 5xx, 429) after every retry.
class NetworkError : public Error {
 public:
  using Error::Error;
};

/**
 * How files are addressed on the server.
 *
 * Direct: GET <base_url>/<file name> returns the file body.
 * TemporaryUrl: GET <base_url>/<file name>/url returns JSON with a
 * "temporaryDownloadUrl" field, which is then fetched (two requests).
 */
enum class UrlMode { Direct, TemporaryUrl };

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

struct FetchConfig {
  std::string base_url;
  UrlMode mode = UrlMode::Direct;
  std::string api_key_env = "NOWCAST_API_KEY";
  std::string api_key_header = "Authorization";
  std::size_t requests_per_hour = 100;
  std::filesystem::path cache_dir = "cache";
  std::string file_pattern = "%Y%m%d%H%M.png";  // strftime, UTC
  minutes cadence{5};
  std::chrono::seconds timeout{30};
  RetryPolicy retry;

  void validate() const {
    if (base_url.empty()) throw ConfigError("fetch: base_url is empty");
    if (requests_per_hour == 0) throw ConfigError("fetch: requests_per_hour must be > 0");
    if (cadence.count() <= 0) throw ConfigError("fetch: cadence must be > 0");
    if (retry.max_attempts == 0) throw ConfigError("fetch: max_attempts must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    if (ec || !std::filesystem::is_directory(cache_dir)) {
      throw ConfigError("fetch: cache directory is not writable: " + cache_dir.string());
    }
  }

  static FetchConfig read(const KeyValueConfig& kv) {
    FetchConfig c;
    c.base_url = kv.get_string("fetch.base_url", c.base_url);
    const auto mode = kv.get_string("fetch.mode", "direct");
    if (mode == "direct") {
      c.mode = UrlMode::Direct;
    } else if (mode == "temporary_url") {
      c.mode = UrlMode::TemporaryUrl;
    } else {
      throw ConfigError("fetch.mode must be 'direct' or 'temporary_url', got '" + mode + "'");
    }
    c.api_key_env = kv.get_string("fetch.api_key_env", c.api_key_env);
    c.api_key_header = kv.get_string("fetch.api_key_header", c.api_key_header);
    c.requests_per_hour = kv.get_number("fetch.requests_per_hour", c.requests_per_hour);
    c.cache_dir = kv.get_string("fetch.cache_dir", c.cache_dir.string());
    c.file_pattern = kv.get_string("fetch.file_pattern", c.file_pattern);
    c.cadence = minutes(kv.get_number<long>("fetch.cadence_minutes", c.cadence.count()));
    c.timeout = std::chrono::seconds(kv.get_number<long>("fetch.timeout_seconds", c.timeout.count()));
    c.retry.max_attempts = kv.get_number("fetch.max_attempts", c.retry.max_attempts);
    c.retry.initial_backoff =
        std::chrono::milliseconds(kv.get_number<long>("fetch.backoff_ms", c.retry.initial_backoff.count()));
    c.retry.multiplier = kv.get_number("fetch.backoff_multiplier", c.retry.multiplier);
    return c;
  }
};

using Clock = std::function<Instant()>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Instant system_now() { return std::chrono::time_point_cast<seconds>(std::chrono::system_clock::now()); }

/**
 * Sliding one-hour window of request times. The log is persisted as one
 * UNIX timestamp per line so the budget survives process restarts.
 */
class RequestBudget {
 public:
  RequestBudget(std::size_t per_hour, std::filesystem::path log_path, Clock clock = system_now)
      : per_hour_(per_hour), log_path_(std::move(log_path)), clock_(std::move(clock)) {
    std::ifstream in(log_path_);
    std::int64_t t = 0;
    while (in >> t) log_.push_back(Instant(seconds(t)));
  }

  std::size_t remaining() {
    prune();
    return log_.size() >= per_hour_ ? 0 : per_hour_ - log_.size();
  }

  /// Records one request if the budget allows it.
  bool try_acquire() {
    if (remaining() == 0) return false;
    log_.push_back(clock_());
    persist();
    return true;
  }

 private:
  void prune() {
    const Instant cutoff = clock_() - std::chrono::hours(1);
    while (!log_.empty() && log_.front() <= cutoff) log_.pop_front();
  }

  void persist() const {
    if (log_path_.empty()) return;
    std::ofstream out(log_path_, std::ios::trunc);
    for (auto t : log_) out << t.time_since_epoch().count() << '\n';
  }

  std::size_t per_hour_;
  std::filesystem::path log_path_;
  Clock clock_;
  std::deque<Instant> log_;
};

struct FetchResult {
  std::vector<std::filesystem::path> files;  // cached paths, in time order
  std::vector<Instant> missing;              // 404 on the server
  bool budget_exhausted = false;             // true when the result is partial
  std::size_t network_requests = 0;
  std::size_t cache_hits = 0;
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/' or is empty
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("URL without scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

/**
 * Cache-first downloader. Every file of the window is looked up in the cache
 * directory first; only misses touch the network, and each HTTP request
 * (retries included) is charged against the hourly budget. When the budget
 * runs out the files fetched so far are returned with `budget_exhausted`.
 * Requests are issued one at a time.
 */
class FetchClient {
 public:
  explicit FetchClient(FetchConfig cfg, Clock clock = system_now,
                       Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : cfg_((cfg.validate(), std::move(cfg))),
        budget_(cfg_.requests_per_hour, cfg_.cache_dir / ".request_log", clock),
        sleeper_(std::move(sleeper)) {}

  std::filesystem::path cache_path(Instant t) const { return cfg_.cache_dir / format_utc(t, cfg_.file_pattern.c_str()); }

  /// Files for every cadence step in the half-open window [from, to).
  FetchResult fetch_frames(Instant from, Instant to) {
    if (!(from < to)) throw ValueError("fetch_frames: window start must precede its end");
    FetchResult result;
    for (Instant t = from; t < to; t += cfg_.cadence) {
      const auto path = cache_path(t);
      if (std::filesystem::exists(path)) {
        ++result.cache_hits;
        result.files.push_back(path);
        continue;
      }
      const auto status = download(path.filename().string(), path, result);
      if (status == Outcome::BudgetExhausted) {
        result.budget_exhausted = true;
        break;
      }
      if (status == Outcome::Missing) {
        result.missing.push_back(t);
      } else {
        result.files.push_back(path);
      }
    }
    return result;
  }

  RequestBudget& budget() { return budget_; }

 private:
  enum class Outcome { Stored, Missing, BudgetExhausted };

  std::string api_key() const {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("no API key: set the " + cfg_.api_key_env + " environment variable");
    }
    return key;
  }

  // GET with retries on transport errors, 429 and 5xx. Returns false when
  // the budget is exhausted before a response arrives.
  bool get(const std::string& url, const httplib::Headers& headers, httplib::Response& out,
           FetchResult& result) {
    const auto [origin, path] = detail::split_url(url);
    auto backoff = cfg_.retry.initial_backoff;
    std::string last_error;
    for (std::size_t attempt = 0; attempt < cfg_.retry.max_attempts; ++attempt) {
      if (attempt > 0) {
        sleeper_(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * cfg_.retry.multiplier));
      }
      if (!budget_.try_acquire()) return false;
      ++result.network_requests;
      httplib::Client client(origin);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      client.set_follow_location(true);
      auto res = client.Get(path.empty() ? "/" : path, headers);
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      out = *res;
      return true;
    }
    throw NetworkError("GET " + url + " failed after " + std::to_string(cfg_.retry.max_attempts) +
                       " attempts: " + last_error);
  }

  static void check_auth(const httplib::Response& res, const std::string& url) {
    if (res.status == 401 || res.status == 403) {
      throw AuthError("server rejected the API key (HTTP " + std::to_string(res.status) + ") for " + url);
    }
  }

  Outcome download(const std::string& name, const std::filesystem::path& dest, FetchResult& result) {
    const httplib::Headers headers{{cfg_.api_key_header, api_key()}};
    std::string url = cfg_.base_url + "/" + name;
    if (cfg_.mode == UrlMode::TemporaryUrl) url += "/url";
    httplib::Response res;
    if (!get(url, headers, res, result)) return Outcome::BudgetExhausted;
    check_auth(res, url);
    if (res.status == 404) return Outcome::Missing;
    if (res.status != 200) throw NetworkError("GET " + url + " returned HTTP " + std::to_string(res.status));

    if (cfg_.mode == UrlMode::TemporaryUrl) {
      std::string file_url;
      try {
        file_url = nlohmann::json::parse(res.body).at("temporaryDownloadUrl").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw NetworkError("GET " + url + ": unexpected response body: " + e.what());
      }
      if (!get(file_url, {}, res, result)) return Outcome::BudgetExhausted;
      check_auth(res, file_url);
      if (res.status == 404) return Outcome::Missing;
      if (res.status != 200) {
        throw NetworkError("GET " + file_url + " returned HTTP " + std::to_string(res.status));
      }
    }

    // Write to a temporary name and rename so readers never see partial files.
    const auto tmp = dest.string() + ".part";
    io::write_file(tmp, std::span(reinterpret_cast<const std::uint8_t*>(res.body.data()), res.body.size()));
    std::filesystem::rename(tmp, dest);
    return Outcome::Stored;
  }

  FetchConfig cfg_;
  RequestBudget budget_;
  Sleeper sleeper_;
};

/// One-shot convenience wrapper around FetchClient.
inline FetchResult fetch_frames(const FetchConfig& cfg, Instant from, Instant to) {
  FetchClient client(cfg);
  return client.fetch_frames(from, to);
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_FETCH_HPP
