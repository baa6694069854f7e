#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "flynn/fetch.hpp"
#include "flynn/sha256.hpp"

using namespace flynn;

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  explicit LocalServer(std::string body) {
    server.Get("/data.csv", [this, body = std::move(body)](
                                const httplib::Request&,
                                httplib::Response& res) {
      ++hits;
      res.set_content(body, "text/csv");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LocalServer() {
    server.stop();
    thread.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/data.csv";
  }
};

std::filesystem::path fresh_cache_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("flynn_cache_" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  REQUIRE(sha256_hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  REQUIRE(sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(sha256_hex(std::string(
              "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("second fetch is a cache hit with zero network calls") {
  LocalServer server("a,b,label\n1,2,x\n");
  const auto cache = fresh_cache_dir("hit");
  const std::string first = fetch_dataset(server.url(), cache.string());
  REQUIRE(server.hits == 1);
  const std::string second = fetch_dataset(server.url(), cache.string());
  REQUIRE(second == first);
  REQUIRE(server.hits == 1);

  std::ifstream in(first);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  REQUIRE(content == "a,b,label\n1,2,x\n");
}

TEST_CASE("corrupted cache entry triggers a re-download") {
  LocalServer server("payload-v1\n");
  const auto cache = fresh_cache_dir("corrupt");
  const std::string path = fetch_dataset(server.url(), cache.string());
  REQUIRE(server.hits == 1);
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage";
  }
  const std::string again = fetch_dataset(server.url(), cache.string());
  REQUIRE(server.hits == 2);
  std::ifstream in(again);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  REQUIRE(content == "payload-v1\n");
}

TEST_CASE("unreachable host surfaces a typed error after retries") {
  const auto cache = fresh_cache_dir("unreachable");
  FetchOptions options;
  options.max_retries = 2;
  options.initial_backoff = std::chrono::milliseconds(10);
  options.timeout = std::chrono::seconds(1);
  REQUIRE_THROWS_AS(
      fetch_dataset("http://127.0.0.1:1/never", cache.string(), options),
      TransportError);
}

TEST_CASE("bad urls are config errors") {
  const auto cache = fresh_cache_dir("badurl");
  REQUIRE_THROWS_AS(fetch_dataset("ftp://host/x", cache.string()), ConfigError);
  REQUIRE_THROWS_AS(fetch_dataset("nonsense", cache.string()), ConfigError);
}
