#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "hoir/errors.hpp"

namespace hoir {

enum class ProviderKind { http, mock };

struct ProviderSpec {
  std::string id;
  ProviderKind kind = ProviderKind::mock;
  std::string endpoint;     // http only, e.g. https://host/v1/chat/completions
  std::string model_name;
  std::string api_key_env;  // http only
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::filesystem::path rules;  // mock only
  int max_concurrency = 4;
  double timeout = 60.0;  // seconds
  int max_retries = 2;
  double backoff_base = 1.0;  // seconds; doubled per retry, +/-20% jitter

  /// Throws ValidationError when the spec is incomplete for its kind.
  void validate() const;
};

struct CompletionRequest {
  std::string provider_id;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 256;
};

struct CompletionResponse {
  std::string text;
  bool cached = false;
  double latency = 0.0;  // seconds
};

class ProviderError : public Error {
 public:
  enum class Kind {
    auth,       // credentials missing or rejected; not retried
    timeout,    // request timed out, or retries exhausted
    malformed,  // response body does not follow the schema; not retried
    transient,  // connection failure, 429, 5xx; retried
    rejected,   // other client errors; not retried
  };
  ProviderError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == Kind::transient || kind_ == Kind::timeout; }

 private:
  Kind kind_;
};

/// One wire-level attempt. Implementations throw ProviderError on failure.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string send(const CompletionRequest& request) = 0;
};

struct MockRule {
  enum class Matcher { exact_triplet, relation_name, contains_substring };
  Matcher matcher = Matcher::contains_substring;
  std::string key;
  std::string response;
};

/// Ordered (matcher, key, response) rules; the first match wins.
///
/// Prompts carrying test lines ("Input: X Output:") are answered line by
/// line: each test input gets the response of its first matching rule and
/// the answers are joined with newlines. Other prompts are matched as a
/// whole. Unmatched queries answer "Output: 0.5".
class MockRuleTable {
 public:
  static constexpr std::string_view kDefaultResponse = "Output: 0.5";

  MockRuleTable() = default;
  explicit MockRuleTable(std::vector<MockRule> rules);

  /// Tab-separated "matcher_kind<TAB>key<TAB>response" per line; '#' starts
  /// a comment line. Throws ParseError on malformed rows.
  static MockRuleTable parse(std::string_view text);
  static MockRuleTable load(const std::filesystem::path& path);

  std::string respond(std::string_view prompt) const;
  /// Response for a single query text, or nullopt when no rule matches.
  std::optional<std::string> match(std::string_view query) const;
  const std::vector<MockRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<MockRule> rules_;
};

/// Test lines of a rendered prompt: the X of every "Input: X Output:" line.
std::vector<std::string> extract_test_inputs(std::string_view prompt);

CompletionResponse mock_complete(const MockRuleTable& rules, const CompletionRequest& request);

class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(MockRuleTable rules) : rules_(std::move(rules)) {}
  std::string send(const CompletionRequest& request) override;

 private:
  MockRuleTable rules_;
};

/// Chat-completion endpoint speaking the {role, content} messages schema.
class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(ProviderSpec spec);
  std::string send(const CompletionRequest& request) override;

  static std::string request_body(const ProviderSpec& spec, const CompletionRequest& request);
  /// choices[0].message.content; throws ProviderError(malformed).
  static std::string parse_response_body(std::string_view body);

 private:
  ProviderSpec spec_;
};

struct ProviderStats {
  std::size_t calls = 0;     // complete() invocations that reached the backend
  std::size_t attempts = 0;  // wire attempts including retries
  std::size_t failures = 0;  // calls that ended in an error
  std::size_t peak_in_flight = 0;
};

/// A configured endpoint with retry, backoff and a per-provider bound on
/// in-flight requests. Safe for concurrent use.
class Provider {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  Provider(ProviderSpec spec, std::unique_ptr<CompletionBackend> backend);
  /// Builds the backend named by spec.kind (loading mock rules from disk).
  static std::shared_ptr<Provider> create(const ProviderSpec& spec);

  /// Throws PreconditionError for an empty prompt and ProviderError when
  /// the request fails after max_retries retries.
  CompletionResponse complete(const CompletionRequest& request);

  const ProviderSpec& spec() const noexcept { return spec_; }
  ProviderStats stats() const;
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  std::chrono::duration<double> backoff_delay(int retry);

  ProviderSpec spec_;
  std::unique_ptr<CompletionBackend> backend_;
  std::counting_semaphore<> slots_;
  Sleeper sleeper_;
  std::atomic<std::size_t> calls_{0}, attempts_{0}, failures_{0}, in_flight_{0}, peak_in_flight_{0};
  std::mutex rng_mutex_;
  std::mt19937_64 rng_{20240607};
};

inline CompletionResponse complete(Provider& provider, const CompletionRequest& request) {
  return provider.complete(request);
}

/// Content-addressed response store: one file per key, named by the
/// SHA-256 hex digest, holding the raw response text.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key_for(const ProviderSpec& spec, const CompletionRequest& request);

  /// nullopt on a miss; unreadable or empty entries are misses with a warning.
  std::optional<std::string> load(const std::string& key) const;
  void store(const std::string& key, std::string_view text) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Hit: stored text with cached=true and no provider call. Miss: delegates
/// to the provider and stores the result.
CompletionResponse cached_complete(Provider& provider, const CompletionRequest& request,
                                   const ResponseCache* cache);

std::string sha256_hex(std::string_view data);

/// Provider plus cache plus the request defaults shared by all agent calls.
class ModelClient {
 public:
  ModelClient(std::shared_ptr<Provider> provider, std::shared_ptr<const ResponseCache> cache,
              double temperature = 0.0, int max_tokens = 256);

  CompletionResponse ask(std::string prompt) const;

  const std::string& id() const { return provider_->spec().id; }
  Provider& provider() const { return *provider_; }
  std::size_t cache_hits() const { return cache_hits_->load(); }
  std::size_t requests() const { return requests_->load(); }

 private:
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<const ResponseCache> cache_;
  double temperature_;
  int max_tokens_;
  std::shared_ptr<std::atomic<std::size_t>> cache_hits_;
  std::shared_ptr<std::atomic<std::size_t>> requests_;
};

}  // namespace hoir
