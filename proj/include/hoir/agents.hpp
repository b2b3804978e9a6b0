#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hoir/model.hpp"
#include "hoir/provider.hpp"

namespace hoir {

struct AgentOptions {
  double candidate_floor = 0.05;  // base score needed before an agent looks at a relation
  std::size_t batch_size = 16;    // test lines per prompt
  std::size_t parallelism = 1;    // concurrent prompts per agent run
};

/// Frame indices at positions 0, interval, 2*interval, ... of `frame_indices`.
/// Throws PreconditionError when interval < 1.
std::vector<int> select_keyframes(const std::vector<int>& frame_indices, int interval);
std::vector<int> frame_indices(const VideoPredictionSet& set);

/// A (keyframe, pair slot, relation) whose base score clears the floor.
struct Candidate {
  std::size_t frame_pos = 0;  // position in set.frames
  ScoreKey key;
};

std::vector<Candidate> keyframe_candidates(const VideoPredictionSet& set,
                                           const std::vector<int>& keyframes, double floor);

struct Transition {
  int frame_index = 0;        // frame t+1
  std::size_t frame_pos = 0;  // its position in set.frames
  std::size_t pair = 0;       // slot at t+1
  PairId pair_id;
  std::size_t old_relation = 0;
  std::size_t new_relation = 0;
};

/// Pairs whose argmax relation (lowest index on ties) changes between
/// consecutive frames of the list. Throws TrackingUnavailableError for an
/// untracked video.
std::vector<Transition> detect_transitions(const VideoPredictionSet& set);

/// Bookkeeping for one agent run against one provider.
struct AgentRunStats {
  std::size_t prompts = 0;         // prompts sent, cache hits included
  std::size_t failed_prompts = 0;  // prompts that ended in a provider error
  std::size_t parse_failures = 0;  // test slots that yielded no usable value
  std::size_t requested = 0;       // keys the agent was asked to score
  std::size_t scored = 0;          // keys that received a score

  AgentRunStats& operator+=(const AgentRunStats& other);
};

struct AgentRun {
  AgentScoreTable table;
  AgentRunStats stats;
};

/// s_cs for every candidate. Each distinct triplet text is asked once.
AgentRun run_common_sense(const ModelClient& client, const VideoPredictionSet& set,
                          const std::vector<Candidate>& candidates, const AgentOptions& options);

/// Relations the provider calls spatial-aware, asking once per distinct
/// relation among `relations`. Unparseable answers count as not aware.
std::set<std::size_t> classify_spatial_awareness(const ModelClient& client,
                                                 const RelationVocabulary& vocab,
                                                 const std::set<std::size_t>& relations,
                                                 AgentRunStats& stats, std::size_t parallelism = 1);

/// Stage one awareness, then s_spatial for candidates of aware relations
/// using the boxes of their own frame.
AgentRun run_spatial(const ModelClient& client, const VideoPredictionSet& set,
                     const std::vector<Candidate>& candidates, const AgentOptions& options);

/// s_temporal at (t+1, pair, new relation) for every transition.
AgentRun run_temporal(const ModelClient& client, const VideoPredictionSet& set,
                      const std::vector<Transition>& transitions, const AgentOptions& options);

/// Copies keyframe scores to the other frames. A tracked pair takes every
/// score of the nearest keyframe holding the same pair id (the earlier one
/// on a tie). In an untracked video only s_cs travels, matched by triplet
/// text. Keyframe entries are returned unchanged.
AgentScoreTable propagate_scores(const AgentScoreTable& table, const VideoPredictionSet& set,
                                 const std::vector<int>& keyframes);

/// Per key and agent, the mean over the tables holding a value.
AgentScoreTable average_providers(const std::vector<AgentScoreTable>& tables);

}  // namespace hoir
