#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hoir/agents.hpp"
#include "hoir/model.hpp"
#include "hoir/prompt.hpp"

namespace hoir {

enum class DebateMode { disagreement, always, off };

/// "disagreement" | "always" | "off"; throws ValidationError otherwise.
DebateMode parse_debate_mode(std::string_view text);
std::string_view debate_mode_name(DebateMode mode);

/// Selection rule for one triplet given its per-provider fused scores.
bool should_debate(std::span<const double> provider_fused, DebateMode mode, double delta);

/// One stage-one score column of the debate question.
struct ProviderView {
  std::string provider;
  AgentScores scores;
  double fused = 0;
};

struct DebateCandidate {
  ScoreKey key;
  std::vector<double> provider_fused;
  std::string question;
};

/// Builds the question: the triplet with both boxes, then every provider's
/// stage-one scores, then a request for a final score.
std::string debate_question(const SpatialQuery& triplet, std::span<const ProviderView> views);

/// Keyframe candidates chosen for debate. `provider_tables` holds one
/// stage-one table per provider, in `provider_ids` order.
std::vector<DebateCandidate> select_debate_candidates(const VideoPredictionSet& set,
                                                      const std::vector<Candidate>& candidates,
                                                      const std::vector<AgentScoreTable>& provider_tables,
                                                      const std::vector<std::string>& provider_ids,
                                                      const FusionWeights& weights, DebateMode mode,
                                                      double delta);

/// A debate participant: answers a rendered prompt or throws.
struct Participant {
  std::string id;
  std::function<std::string(const std::string& prompt)> answer;
};

struct DebateTranscript {
  std::string question;
  std::vector<HistoryEntry> entries;  // entries[0] is the question itself
  std::string judge_id;
  std::string judge_answer;
  bool judge_failed = false;
  std::optional<double> judge_score;
};

/// Single pass: H = [q]; each debater D_i answers q, then every other
/// debater D_j answers with H in view; the judge reads H last. A failing
/// debater leaves a marked empty entry. Throws PreconditionError without debaters.
DebateTranscript run_debate(std::string question, std::span<const Participant> debaters,
                            const Participant& judge);

/// JSON lines (speaker, text, failed), then a final judge record. The file
/// is named by the SHA-256 of the question. Returns the path written.
std::filesystem::path write_transcript(const DebateTranscript& transcript, const std::filesystem::path& dir);

}  // namespace hoir
