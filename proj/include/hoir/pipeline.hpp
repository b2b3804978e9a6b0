#pragma once

#include <string>
#include <vector>

#include "hoir/agents.hpp"
#include "hoir/config.hpp"
#include "hoir/debate.hpp"
#include "hoir/eval.hpp"
#include "hoir/provider.hpp"

namespace hoir {

struct ProviderRunStats {
  std::string id;
  AgentRunStats common_sense;
  AgentRunStats spatial;
  AgentRunStats temporal;
};

/// Everything the agents produced, before aggregation. Computed once and
/// shared by every toggle combination of an ablation.
struct StageOne {
  std::vector<int> keyframes;
  std::vector<Candidate> candidates;
  std::vector<Transition> transitions;  // only those landing on a keyframe
  bool tracked = false;
  std::vector<AgentScoreTable> provider_tables;  // in provider order
  std::vector<ProviderRunStats> stats;
};

struct Coverage {
  std::size_t requested = 0;
  std::size_t scored = 0;
  double fraction() const { return requested ? static_cast<double>(scored) / requested : 0.0; }
};

struct RefinementResult {
  AgentScoreTable keyframe_scores;  // provider means plus debate, keyframes only
  AgentScoreTable scores;           // after propagation
  FusedScores fused;
  std::vector<DebateTranscript> transcripts;
  Coverage common_sense, spatial, temporal, debate;
};

/// The two-stage refinement over a configured set of providers.
class Refiner {
 public:
  /// Builds providers (and the response cache when configured).
  explicit Refiner(RefinementConfig config);
  /// Uses the given clients, in provider order, instead of building them.
  Refiner(RefinementConfig config, std::vector<ModelClient> clients);

  StageOne stage_one(const VideoPredictionSet& set) const;
  RefinementResult finish(const VideoPredictionSet& set, const StageOne& stage,
                          const ComponentToggles& toggles = {}) const;
  RefinementResult run(const VideoPredictionSet& set, const ComponentToggles& toggles = {}) const {
    return finish(set, stage_one(set), toggles);
  }

  /// Baseline row, then one row per combination of the four components.
  std::vector<AblationRow> ablate(const VideoPredictionSet& set, const GroundTruthSet& gt,
                                  const std::vector<int>& ks = kDefaultKs) const;

  const RefinementConfig& config() const noexcept { return config_; }
  const std::vector<ModelClient>& clients() const noexcept { return clients_; }

  /// Remote calls that reached a backend, summed over providers.
  std::size_t provider_calls() const;
  /// True when prompts were sent and every one of them failed.
  static bool exhausted(const StageOne& stage);

  /// Human-readable cost and coverage report.
  std::string summary(const StageOne& stage, const RefinementResult& result) const;

 private:
  RefinementConfig config_;
  std::vector<ModelClient> clients_;
};

}  // namespace hoir
