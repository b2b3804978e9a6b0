#include "hoir/provider.hpp"

#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace hoir {

void ProviderSpec::validate() const {
  if (id.empty()) throw ValidationError("provider id is empty");
  if (max_concurrency < 1)
    throw ValidationError(fmt::format("provider {}: max_concurrency must be >= 1", id));
  if (max_retries < 0) throw ValidationError(fmt::format("provider {}: max_retries must be >= 0", id));
  if (!(timeout > 0)) throw ValidationError(fmt::format("provider {}: timeout must be positive", id));
  if (!(backoff_base >= 0)) throw ValidationError(fmt::format("provider {}: backoff_base must be >= 0", id));
  if (kind == ProviderKind::http) {
    if (endpoint.empty()) throw ValidationError(fmt::format("provider {}: http kind needs an endpoint", id));
    if (api_key_env.empty())
      throw ValidationError(fmt::format("provider {}: http kind needs api_key_env", id));
  } else if (rules.empty()) {
    throw ValidationError(fmt::format("provider {}: mock kind needs a rule table", id));
  }
}

Provider::Provider(ProviderSpec spec, std::unique_ptr<CompletionBackend> backend)
    : spec_(std::move(spec)),
      backend_(std::move(backend)),
      slots_(std::max(1, spec_.max_concurrency)),
      sleeper_([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }) {}

std::shared_ptr<Provider> Provider::create(const ProviderSpec& spec) {
  spec.validate();
  std::unique_ptr<CompletionBackend> backend;
  if (spec.kind == ProviderKind::mock)
    backend = std::make_unique<MockBackend>(MockRuleTable::load(spec.rules));
  else
    backend = std::make_unique<HttpBackend>(spec);
  return std::make_shared<Provider>(spec, std::move(backend));
}

std::chrono::duration<double> Provider::backoff_delay(int retry) {
  double u;
  {
    std::lock_guard lock(rng_mutex_);
    u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  }
  double jitter = 1.0 + 0.4 * (u - 0.5);
  return std::chrono::duration<double>(spec_.backoff_base * std::pow(2.0, retry) * jitter);
}

CompletionResponse Provider::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw PreconditionError("completion prompt is empty");
  if (!(request.temperature >= 0)) throw PreconditionError("temperature must be >= 0");
  if (request.max_tokens < 1) throw PreconditionError("max_tokens must be positive");

  slots_.acquire();
  struct Release {
    Provider& self;
    ~Release() {
      --self.in_flight_;
      self.slots_.release();
    }
  } release{*this};
  std::size_t now = ++in_flight_;
  std::size_t peak = peak_in_flight_.load();
  while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
  }
  ++calls_;

  auto start = std::chrono::steady_clock::now();
  for (int attempt = 0;; ++attempt) {
    ++attempts_;
    try {
      std::string text = backend_->send(request);
      std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      return {std::move(text), false, elapsed.count()};
    } catch (const ProviderError& e) {
      if (!e.retryable()) {
        ++failures_;
        throw;
      }
      if (attempt >= spec_.max_retries) {
        ++failures_;
        throw ProviderError(ProviderError::Kind::timeout,
                            fmt::format("provider {}: giving up after {} attempts: {}", spec_.id,
                                        attempt + 1, e.what()));
      }
    }
    sleeper_(backoff_delay(attempt));
  }
}

ProviderStats Provider::stats() const {
  return {calls_.load(), attempts_.load(), failures_.load(), peak_in_flight_.load()};
}

ModelClient::ModelClient(std::shared_ptr<Provider> provider, std::shared_ptr<const ResponseCache> cache,
                         double temperature, int max_tokens)
    : provider_(std::move(provider)),
      cache_(std::move(cache)),
      temperature_(temperature),
      max_tokens_(max_tokens),
      cache_hits_(std::make_shared<std::atomic<std::size_t>>(0)),
      requests_(std::make_shared<std::atomic<std::size_t>>(0)) {}

CompletionResponse ModelClient::ask(std::string prompt) const {
  CompletionRequest request{provider_->spec().id, std::move(prompt), temperature_, max_tokens_};
  ++*requests_;
  auto response = cached_complete(*provider_, request, cache_.get());
  if (response.cached) ++*cache_hits_;
  return response;
}

}  // namespace hoir
