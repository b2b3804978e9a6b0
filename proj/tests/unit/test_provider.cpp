#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "hoir/provider.hpp"
#include "support.hpp"

using namespace hoir;
using hoir::test::TempDir;

namespace {

ProviderSpec mock_spec(std::string id = "m") {
  ProviderSpec spec;
  spec.id = std::move(id);
  spec.kind = ProviderKind::mock;
  spec.model_name = "mock";
  spec.rules = "unused.tsv";
  spec.backoff_base = 0.0;
  return spec;
}

// Fails with `kind` for the first `failures` attempts, then echoes.
class ScriptedBackend : public CompletionBackend {
 public:
  ScriptedBackend(int failures, ProviderError::Kind kind) : failures_(failures), kind_(kind) {}
  std::string send(const CompletionRequest& request) override {
    ++sent;
    if (sent <= failures_) throw ProviderError(kind_, "scripted failure");
    return "echo: " + request.prompt;
  }
  std::atomic<int> sent{0};

 private:
  int failures_;
  ProviderError::Kind kind_;
};

class SlowBackend : public CompletionBackend {
 public:
  std::string send(const CompletionRequest&) override {
    int now = ++in_flight;
    {
      std::lock_guard lock(mutex);
      peak = std::max(peak, now);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
    --in_flight;
    return "Output: 0.5";
  }
  std::atomic<int> in_flight{0};
  int peak = 0;
  std::mutex mutex;
};

class CountingBackend : public CompletionBackend {
 public:
  std::string send(const CompletionRequest& request) override {
    ++sent;
    return "answer to " + request.prompt;
  }
  std::atomic<int> sent{0};
};

}  // namespace

TEST_CASE("mock rule table examples") {
  auto table = MockRuleTable::parse(
      "# comment\n"
      "exact-triplet\t<person,sit on,chair>\tOutput: 1.0\n"
      "exact-triplet\t<person,hug,table>\tOutput: 0.1\n"
      "contains-substring\thug\tOutput: 0.9\n"
      "relation-name\tride\tOutput: yes\n");
  CHECK(mock_complete(table, {"m", "Score <person,sit on,chair> please"}).text == "Output: 1.0");
  CHECK(mock_complete(table, {"m", "about <person,hug,table>"}).text == "Output: 0.1");
  CHECK(mock_complete(table, {"m", "nothing relevant"}).text == "Output: 0.5");
  CHECK(mock_complete(table, {"m", "ride"}).text == "Output: yes");
  CHECK(mock_complete(table, {"m", "is <person,ride,horse> ok"}).text == "Output: yes");
  CHECK_THROWS_AS(mock_complete(table, {"m", ""}), PreconditionError);
}

TEST_CASE("mock answers each test line") {
  auto table = MockRuleTable::parse("exact-triplet\t<person,hug,table>\tOutput: 0.1\n"
                                    "relation-name\tride\tOutput: yes\n");
  std::string prompt = "Instruction\n\nInput:<person,hug,table> Output: 0.7\n\n"
                       "Input: <person,hug,table> Output:\nInput: <person,hold,cup> Output:\nInput: ride Output:";
  CHECK(extract_test_inputs(prompt) == std::vector<std::string>{"<person,hug,table>", "<person,hold,cup>", "ride"});
  CHECK(table.respond(prompt) == "Output: 0.1\nOutput: 0.5\nOutput: yes");
}

TEST_CASE("rule table parse errors and escapes") {
  CHECK_THROWS_AS(MockRuleTable::parse("bogus\tkey\tresp\n"), ParseError);
  CHECK_THROWS_AS(MockRuleTable::parse("exact-triplet\tnot a triplet\tresp\n"), ParseError);
  CHECK_THROWS_AS(MockRuleTable::parse("contains-substring\tonly-two-fields\n"), ParseError);
  CHECK_THROWS_AS(MockRuleTable::parse("contains-substring\tkey\t\n"), ParseError);
  auto t = MockRuleTable::parse("contains-substring\tk\tline1\\nline2\\tx\n");
  CHECK(t.rules()[0].response == "line1\nline2\tx");
}

TEST_CASE("retries transient failures with backoff") {
  auto backend = std::make_unique<ScriptedBackend>(2, ProviderError::Kind::transient);
  auto* raw = backend.get();
  auto spec = mock_spec();
  spec.backoff_base = 1.0;
  spec.max_retries = 2;
  Provider provider(spec, std::move(backend));
  std::vector<double> delays;
  provider.set_sleeper([&](std::chrono::duration<double> d) { delays.push_back(d.count()); });
  auto response = provider.complete({"m", "hi"});
  CHECK(response.text == "echo: hi");
  CHECK(raw->sent == 3);
  REQUIRE(delays.size() == 2);
  CHECK(delays[0] >= 0.8);
  CHECK(delays[0] <= 1.2);
  CHECK(delays[1] >= 1.6);
  CHECK(delays[1] <= 2.4);
}

TEST_CASE("gives up after max_retries + 1 attempts") {
  auto backend = std::make_unique<ScriptedBackend>(100, ProviderError::Kind::timeout);
  auto* raw = backend.get();
  auto spec = mock_spec();
  spec.max_retries = 2;
  Provider provider(spec, std::move(backend));
  provider.set_sleeper([](auto) {});
  try {
    provider.complete({"m", "hi"});
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == ProviderError::Kind::timeout);
    CHECK(std::string(e.what()).find("after 3 attempts") != std::string::npos);
  }
  CHECK(raw->sent == 3);
  CHECK(provider.stats().failures == 1);
}

TEST_CASE("auth and malformed errors are not retried") {
  for (auto kind : {ProviderError::Kind::auth, ProviderError::Kind::malformed, ProviderError::Kind::rejected}) {
    auto backend = std::make_unique<ScriptedBackend>(100, kind);
    auto* raw = backend.get();
    Provider provider(mock_spec(), std::move(backend));
    provider.set_sleeper([](auto) {});
    CHECK_THROWS_AS(provider.complete({"m", "hi"}), ProviderError);
    CHECK(raw->sent == 1);
  }
}

TEST_CASE("request preconditions") {
  Provider provider(mock_spec(), std::make_unique<CountingBackend>());
  CHECK_THROWS_AS(provider.complete({"m", ""}), PreconditionError);
  CHECK_THROWS_AS(provider.complete({"m", "x", -1.0}), PreconditionError);
  CHECK_THROWS_AS(provider.complete({"m", "x", 0.0, 0}), PreconditionError);
}

TEST_CASE("in-flight requests never exceed max_concurrency") {
  auto backend = std::make_unique<SlowBackend>();
  auto* raw = backend.get();
  auto spec = mock_spec();
  spec.max_concurrency = 2;
  Provider provider(spec, std::move(backend));
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { provider.complete({"m", "x"}); });
  threads.clear();
  CHECK(raw->peak <= 2);
  CHECK(raw->peak >= 1);
  CHECK(provider.stats().peak_in_flight <= 2);
  CHECK(provider.stats().calls == 8);
}

TEST_CASE("spec validation") {
  ProviderSpec http;
  http.id = "h";
  http.kind = ProviderKind::http;
  CHECK_THROWS_AS(http.validate(), ValidationError);
  http.endpoint = "http://127.0.0.1:9/v1";
  CHECK_THROWS_AS(http.validate(), ValidationError);
  http.api_key_env = "KEY";
  CHECK_NOTHROW(http.validate());
  http.max_concurrency = 0;
  CHECK_THROWS_AS(http.validate(), ValidationError);
}

TEST_CASE("response cache") {
  TempDir dir;
  auto backend = std::make_unique<CountingBackend>();
  auto* raw = backend.get();
  Provider provider(mock_spec(), std::move(backend));
  ResponseCache cache(dir.path());

  auto first = cached_complete(provider, {"m", "prompt"}, &cache);
  auto second = cached_complete(provider, {"m", "prompt"}, &cache);
  CHECK_FALSE(first.cached);
  CHECK(second.cached);
  CHECK(second.text == first.text);
  CHECK(raw->sent == 1);

  CHECK_FALSE(cached_complete(provider, {"m", "prompT"}, &cache).cached);
  CHECK_FALSE(cached_complete(provider, {"m", "prompt", 0.7}, &cache).cached);
  CHECK_FALSE(cached_complete(provider, {"m", "prompt", 0.0, 128}, &cache).cached);
  CHECK(raw->sent == 4);

  auto key = ResponseCache::key_for(provider.spec(), {"m", "prompt"});
  CHECK(key.size() == 64);
  CHECK(std::filesystem::exists(dir / key));
  std::ofstream(dir / key, std::ios::trunc).close();  // corrupt: empty entry
  auto after = cached_complete(provider, {"m", "prompt"}, &cache);
  CHECK_FALSE(after.cached);
  CHECK(raw->sent == 5);
  CHECK(cached_complete(provider, {"m", "prompt"}, &cache).cached);
}

TEST_CASE("remote calls equal distinct cache keys") {
  TempDir dir;
  auto backend = std::make_unique<CountingBackend>();
  auto* raw = backend.get();
  Provider provider(mock_spec(), std::move(backend));
  auto cache = std::make_shared<ResponseCache>(dir.path());
  ModelClient client(std::shared_ptr<Provider>(&provider, [](Provider*) {}), cache);
  std::mt19937 rng(3);
  std::set<std::string> distinct;
  for (int i = 0; i < 200; ++i) {
    std::string p = "p" + std::to_string(rng() % 17);
    distinct.insert(p);
    client.ask(p);
  }
  CHECK(raw->sent == static_cast<int>(distinct.size()));
  CHECK(client.requests() == 200);
  CHECK(client.cache_hits() == 200 - distinct.size());
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("http backend against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::atomic<int> flaky{0};
  std::string last_auth, last_body;
  std::mutex mutex;
  server.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    std::lock_guard lock(mutex);
    last_auth = req.get_header_value("Authorization");
    last_body = req.body;
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Output: 0.8"}}]})", "application/json");
  });
  server.Post("/denied", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (++flaky <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"fine"}}]})", "application/json");
  });
  server.Post("/garbage", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>", "text/html");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::jthread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("HOIR_TEST_KEY", "secret", 1);
  auto spec_for = [&](const std::string& path) {
    ProviderSpec spec;
    spec.id = "h";
    spec.kind = ProviderKind::http;
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + path;
    spec.model_name = "some-model";
    spec.api_key_env = "HOIR_TEST_KEY";
    spec.timeout = 5;
    spec.max_retries = 2;
    spec.backoff_base = 0.0;
    return spec;
  };

  SUBCASE("success") {
    auto provider = Provider::create(spec_for("/ok"));
    auto response = provider->complete({"h", "hello", 0.0, 64});
    CHECK(response.text == "Output: 0.8");
    std::lock_guard lock(mutex);
    CHECK(last_auth == "Bearer secret");
    auto body = nlohmann::json::parse(last_body);
    CHECK(body["model"] == "some-model");
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "hello");
    CHECK(body["max_tokens"] == 64);
  }
  SUBCASE("401 is an auth error without retry") {
    auto provider = Provider::create(spec_for("/denied"));
    try {
      provider->complete({"h", "hello"});
      FAIL("expected auth error");
    } catch (const ProviderError& e) {
      CHECK(e.kind() == ProviderError::Kind::auth);
    }
    CHECK(hits == 1);
  }
  SUBCASE("5xx is retried") {
    auto provider = Provider::create(spec_for("/flaky"));
    CHECK(provider->complete({"h", "hello"}).text == "fine");
    CHECK(provider->stats().attempts == 3);
  }
  SUBCASE("malformed body") {
    auto provider = Provider::create(spec_for("/garbage"));
    try {
      provider->complete({"h", "hello"});
      FAIL("expected malformed error");
    } catch (const ProviderError& e) {
      CHECK(e.kind() == ProviderError::Kind::malformed);
    }
  }
  SUBCASE("missing credentials") {
    auto spec = spec_for("/ok");
    spec.api_key_env = "HOIR_TEST_KEY_THAT_IS_NOT_SET";
    auto provider = Provider::create(spec);
    try {
      provider->complete({"h", "hello"});
      FAIL("expected auth error");
    } catch (const ProviderError& e) {
      CHECK(e.kind() == ProviderError::Kind::auth);
    }
    CHECK(hits == 0);
  }
  server.stop();
}

TEST_CASE("unreachable endpoint times out after 3 attempts") {
  // Bind a port, then close it so nothing listens there.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ::setenv("HOIR_TEST_KEY", "secret", 1);
  ProviderSpec spec;
  spec.id = "dead";
  spec.kind = ProviderKind::http;
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  spec.api_key_env = "HOIR_TEST_KEY";
  spec.timeout = 1;
  spec.max_retries = 2;
  spec.backoff_base = 0.0;
  auto provider = Provider::create(spec);
  try {
    provider->complete({"dead", "hello"});
    FAIL("expected timeout");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == ProviderError::Kind::timeout);
  }
  CHECK(provider->stats().attempts == 3);
}
