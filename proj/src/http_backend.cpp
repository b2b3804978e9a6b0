#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <fmt/format.h>
#include <json.hpp>

#include "hoir/provider.hpp"

namespace hoir {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ValidationError(fmt::format("endpoint \"{}\" lacks a scheme", url));
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(ProviderSpec spec) : spec_(std::move(spec)) { split_endpoint(spec_.endpoint); }

std::string HttpBackend::request_body(const ProviderSpec& spec, const CompletionRequest& request) {
  json body = {
      {"model", spec.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  return body.dump();
}

std::string HttpBackend::parse_response_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProviderError(ProviderError::Kind::malformed, fmt::format("response is not JSON: {}", e.what()));
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string() || content.get<std::string>().empty())
      throw ProviderError(ProviderError::Kind::malformed, "response has no completion text");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(ProviderError::Kind::malformed,
                        fmt::format("response lacks choices[0].message.content: {}", e.what()));
  }
}

std::string HttpBackend::send(const CompletionRequest& request) {
  const char* key = std::getenv(spec_.api_key_env.c_str());
  if (!key || !*key)
    throw ProviderError(ProviderError::Kind::auth,
                        fmt::format("provider {}: environment variable {} is not set", spec_.id,
                                    spec_.api_key_env));

  auto endpoint = split_endpoint(spec_.endpoint);
  httplib::Client client(endpoint.origin);
  auto seconds = std::chrono::duration<double>(spec_.timeout);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(seconds);
  client.set_connection_timeout(micros);
  client.set_read_timeout(micros);
  client.set_write_timeout(micros);

  httplib::Headers headers = {{spec_.auth_header, spec_.auth_prefix + key}};
  auto result = client.Post(endpoint.path, headers, request_body(spec_, request), "application/json");
  if (!result) {
    auto err = result.error();
    auto kind = err == httplib::Error::Read ? ProviderError::Kind::timeout : ProviderError::Kind::transient;
    throw ProviderError(kind, fmt::format("provider {}: {}", spec_.id, httplib::to_string(err)));
  }
  int status = result->status;
  if (status == 401 || status == 403)
    throw ProviderError(ProviderError::Kind::auth,
                        fmt::format("provider {}: credentials rejected (HTTP {})", spec_.id, status));
  if (status == 408 || status == 429 || status >= 500)
    throw ProviderError(ProviderError::Kind::transient, fmt::format("provider {}: HTTP {}", spec_.id, status));
  if (status < 200 || status >= 300)
    throw ProviderError(ProviderError::Kind::rejected, fmt::format("provider {}: HTTP {}", spec_.id, status));
  return parse_response_body(result->body);
}

}  // namespace hoir
