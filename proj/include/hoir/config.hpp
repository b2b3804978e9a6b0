#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hoir/debate.hpp"
#include "hoir/model.hpp"
#include "hoir/provider.hpp"

namespace hoir {

/// Everything a refinement run needs besides its input files. Loaded from
/// a JSON object; relative paths resolve against the config file's folder.
struct RefinementConfig {
  std::vector<ProviderSpec> providers;
  std::string judge_provider;  // empty means the first provider
  int keyframe_interval = 1;
  FusionWeights weights;
  DebateMode debate_mode = DebateMode::disagreement;
  double disagreement_delta = 0.3;
  double candidate_floor = 0.05;
  std::size_t batch_size = 16;
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> transcript_dir;
  std::optional<std::filesystem::path> vocabulary;
  std::size_t parallelism = 4;  // global budget of concurrent prompts

  /// Throws ParseError for malformed JSON or unknown keys, ValidationError
  /// for values that break an invariant.
  static RefinementConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static RefinementConfig load(const std::filesystem::path& path);

  void validate() const;
  const std::string& judge() const;
};

}  // namespace hoir
