#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>

#include "flynn/error.hpp"
#include "flynn/sha256.hpp"

// cpp-httplib pulls in OpenSSL only when asked; plain HTTP plus an explicit
// content hash in the cache index covers the dataset-mirror use case.
#include <httplib.h>

namespace flynn {

struct FetchOptions {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff = std::chrono::milliseconds(250);
  std::chrono::seconds timeout = std::chrono::seconds(30);
};

namespace detail {

// The cache index maps url -> content hash, one "hash url" line per entry;
// payloads live beside it as <hash>.dat.
inline std::filesystem::path cache_index_path(
    const std::filesystem::path& cache_dir) {
  return cache_dir / "index.txt";
}

inline std::map<std::string, std::string> load_cache_index(
    const std::filesystem::path& cache_dir) {
  std::map<std::string, std::string> index;
  std::ifstream in(cache_index_path(cache_dir));
  std::string hash, url;
  while (in >> hash && std::getline(in, url)) {
    if (!url.empty() && url.front() == ' ') url.erase(0, 1);
    index[url] = hash;
  }
  return index;
}

inline void append_cache_index(const std::filesystem::path& cache_dir,
                               const std::string& url,
                               const std::string& hash) {
  std::ofstream out(cache_index_path(cache_dir), std::ios::app);
  out << hash << ' ' << url << '\n';
}

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("fetch: url must start with http:// or https://");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("fetch: unsupported scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string download(const std::string& url,
                            const FetchOptions& options) {
  const ParsedUrl parsed = parse_url(url);
  std::string last_error;
  auto backoff = options.initial_backoff;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(parsed.host_port);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_follow_location(true);
    auto response = client.Get(parsed.path);
    if (!response) {
      last_error = "connection failed (" + to_string(response.error()) + ")";
      continue;
    }
    if (response->status != 200) {
      last_error = "http status " + std::to_string(response->status);
      continue;
    }
    return response->body;
  }
  throw TransportError("fetch: giving up on '" + url + "' after " +
                       std::to_string(options.max_retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace detail

// Download a dataset once and reuse it thereafter. Payloads are stored under
// their content hash; a cached entry whose bytes no longer match its hash is
// treated as corrupt and re-downloaded.
inline std::string fetch_dataset(const std::string& url,
                                 const std::string& cache_dir,
                                 const FetchOptions& options = {}) {
  const std::filesystem::path dir(cache_dir);
  std::filesystem::create_directories(dir);
  auto index = detail::load_cache_index(dir);

  const auto read_file = [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };

  if (const auto hit = index.find(url); hit != index.end()) {
    const auto payload_path = dir / (hit->second + ".dat");
    if (std::filesystem::exists(payload_path)) {
      const std::string cached = read_file(payload_path);
      if (sha256_hex(cached) == hit->second) return payload_path.string();
    }
    // fall through: corrupt or missing payload triggers a re-download
  }

  const std::string body = detail::download(url, options);
  const std::string hash = sha256_hex(body);
  if (const auto hit = index.find(url);
      hit != index.end() && hit->second != hash)
    throw DataError("fetch: content hash mismatch on re-download of '" + url +
                    "' (recorded " + hit->second + ", got " + hash + ")");
  const auto payload_path = dir / (hash + ".dat");
  {
    std::ofstream out(payload_path, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out)
      throw DataError("fetch: cannot write cache file '" +
                      payload_path.string() + "'");
  }
  if (!index.count(url)) detail::append_cache_index(dir, url, hash);
  return payload_path.string();
}

}  // namespace flynn
