#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "hoir/ingest.hpp"
#include "hoir/provider.hpp"

namespace hoir {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_))
    throw IoError(fmt::format("cache directory {} is not usable", dir_.string()));
}

std::string ResponseCache::key_for(const ProviderSpec& spec, const CompletionRequest& request) {
  nlohmann::json canonical = nlohmann::json::array(
      {spec.id, spec.model_name, request.prompt, request.temperature, request.max_tokens});
  return sha256_hex(canonical.dump());
}

std::optional<std::string> ResponseCache::load(const std::string& key) const {
  auto path = dir_ / key;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  if (in) buf << in.rdbuf();
  if (!in || in.bad() || buf.str().empty()) {
    spdlog::warn("cache entry {} is unreadable or empty; treating as a miss", path.string());
    return std::nullopt;
  }
  return buf.str();
}

void ResponseCache::store(const std::string& key, std::string_view text) const {
  write_text_file(dir_ / key, text);
}

CompletionResponse cached_complete(Provider& provider, const CompletionRequest& request,
                                   const ResponseCache* cache) {
  std::string key;
  if (cache) {
    key = ResponseCache::key_for(provider.spec(), request);
    if (auto hit = cache->load(key)) return {std::move(*hit), true, 0.0};
  }
  auto response = provider.complete(request);
  if (cache) cache->store(key, response.text);
  return response;
}

}  // namespace hoir
