#include "hoir/config.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "hoir/ingest.hpp"

namespace hoir {

using nlohmann::json;

namespace {

void reject_unknown(const json& object, const std::set<std::string>& known, std::string_view where) {
  for (const auto& [key, value] : object.items())
    if (!known.contains(key)) throw ParseError(std::string(where), fmt::format("unknown key \"{}\"", key));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

ProviderSpec parse_provider(const json& j, const std::filesystem::path& base, std::size_t index) {
  const std::string where = fmt::format("providers[{}]", index);
  if (!j.is_object()) throw ParseError(where, "expected an object");
  reject_unknown(j,
                 {"id", "kind", "endpoint", "model_name", "api_key_env", "auth_header", "auth_prefix", "rules",
                  "max_concurrency", "timeout", "max_retries", "backoff_base"},
                 where);
  ProviderSpec spec;
  spec.id = j.at("id").get<std::string>();
  auto kind = j.value("kind", std::string("mock"));
  if (kind == "http")
    spec.kind = ProviderKind::http;
  else if (kind == "mock")
    spec.kind = ProviderKind::mock;
  else
    throw ValidationError(fmt::format("{}: unknown kind \"{}\"", where, kind));
  spec.endpoint = j.value("endpoint", std::string());
  spec.model_name = j.value("model_name", spec.id);
  spec.api_key_env = j.value("api_key_env", std::string());
  spec.auth_header = j.value("auth_header", spec.auth_header);
  spec.auth_prefix = j.value("auth_prefix", spec.auth_prefix);
  if (j.contains("rules")) spec.rules = resolve(base, j.at("rules").get<std::string>());
  spec.max_concurrency = j.value("max_concurrency", spec.max_concurrency);
  spec.timeout = j.value("timeout", spec.timeout);
  spec.max_retries = j.value("max_retries", spec.max_retries);
  spec.backoff_base = j.value("backoff_base", spec.backoff_base);
  return spec;
}

}  // namespace

RefinementConfig RefinementConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("byte {}", e.byte), "config is not valid JSON");
  }
  if (!j.is_object()) throw ParseError("", "config must be a JSON object");
  RefinementConfig c;
  try {
    reject_unknown(j,
                   {"providers", "judge_provider", "keyframe_interval", "weights", "debate_mode",
                    "disagreement_delta", "candidate_floor", "batch_size", "temperature", "max_tokens", "cache_dir",
                    "transcript_dir", "vocabulary", "parallelism"},
                   "config");
    const auto& providers = j.at("providers");
    if (!providers.is_array()) throw ParseError("providers", "expected an array");
    for (std::size_t i = 0; i < providers.size(); ++i) c.providers.push_back(parse_provider(providers[i], base_dir, i));
    c.judge_provider = j.value("judge_provider", std::string());
    c.keyframe_interval = j.value("keyframe_interval", c.keyframe_interval);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      reject_unknown(w, {"lambda_cs", "lambda_s", "lambda_t", "lambda_debate", "threshold"}, "weights");
      c.weights.lambda_cs = w.value("lambda_cs", c.weights.lambda_cs);
      c.weights.lambda_s = w.value("lambda_s", c.weights.lambda_s);
      c.weights.lambda_t = w.value("lambda_t", c.weights.lambda_t);
      c.weights.lambda_debate = w.value("lambda_debate", c.weights.lambda_debate);
      c.weights.threshold = w.value("threshold", c.weights.threshold);
    }
    if (j.contains("debate_mode")) c.debate_mode = parse_debate_mode(j.at("debate_mode").get<std::string>());
    c.disagreement_delta = j.value("disagreement_delta", c.disagreement_delta);
    c.candidate_floor = j.value("candidate_floor", c.candidate_floor);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
    if (j.contains("transcript_dir")) c.transcript_dir = resolve(base_dir, j.at("transcript_dir").get<std::string>());
    if (j.contains("vocabulary")) c.vocabulary = resolve(base_dir, j.at("vocabulary").get<std::string>());
    c.parallelism = j.value("parallelism", c.parallelism);
  } catch (const json::exception& e) {
    throw ParseError("config", e.what());
  }
  c.validate();
  return c;
}

RefinementConfig RefinementConfig::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + (e.location().empty() ? "" : ", " + e.location()), e.what());
  }
}

void RefinementConfig::validate() const {
  if (providers.empty()) throw ValidationError("config lists no providers");
  std::set<std::string> ids;
  for (const auto& p : providers) {
    p.validate();
    if (!ids.insert(p.id).second) throw ValidationError(fmt::format("provider id \"{}\" appears twice", p.id));
  }
  if (!judge_provider.empty() && !ids.contains(judge_provider))
    throw ValidationError(fmt::format("judge_provider \"{}\" is not a configured provider", judge_provider));
  if (keyframe_interval < 1) throw ValidationError("keyframe_interval must be >= 1");
  weights.validate();
  if (!(disagreement_delta >= 0)) throw ValidationError("disagreement_delta must be >= 0");
  if (!(candidate_floor >= 0 && candidate_floor <= 1)) throw ValidationError("candidate_floor must lie in [0,1]");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(temperature >= 0)) throw ValidationError("temperature must be >= 0");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
}

const std::string& RefinementConfig::judge() const {
  return judge_provider.empty() ? providers.front().id : judge_provider;
}

}  // namespace hoir
