#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hoir/model.hpp"

namespace hoir {

struct Demonstration {
  std::string input;
  std::string output;
};

/// Instruction, then worked demonstrations, then the test instances.
///
/// Rendered layout:
///
///     <instruction>
///
///     Input:<demo input> Output: <demo output>
///     ...
///
///     Input: <test> Output:
///     ...
struct PromptBundle {
  std::string instruction;
  std::vector<Demonstration> demonstrations;
  std::vector<std::string> tests;

  std::string render() const;
};

extern const std::string_view kCommonSenseInstruction;
extern const std::string_view kSpatialAwarenessInstruction;
extern const std::string_view kSpatialScoringInstruction;
extern const std::string_view kTemporalInstruction;
extern const std::string_view kDebaterPreamble;
extern const std::string_view kJudgePreamble;

/// Throws PreconditionError when `tests` is empty.
PromptBundle render_common_sense(std::span<const std::string> tests);

enum class SpatialStage { awareness, scoring };

struct SpatialQuery {
  std::string triplet;
  BoundingBox human_box;
  BoundingBox object_box;
};

/// "<person,ride,bicycle> person box [10,10,50,100], object box [12,80,55,140]"
/// with coordinates rounded to integers.
std::string spatial_test_input(const SpatialQuery& query);
std::string box_text(const BoundingBox& box);

/// Stage one: one yes/no test per relation name.
PromptBundle render_spatial_awareness(std::span<const std::string> relations);
/// Stage two: one score test per triplet with its boxes.
PromptBundle render_spatial_scoring(std::span<const SpatialQuery> queries);

struct TransitionText {
  std::string before;  // triplet text at frame i
  std::string after;   // triplet text at frame i+1
};

/// "frame i: <before>; frame i+1: <after>"
std::string temporal_test_input(const TransitionText& transition);
/// Throws PreconditionError when empty or when a transition keeps its triplet.
PromptBundle render_temporal(std::span<const TransitionText> transitions);

enum class DebateRole { debater, judge };

struct HistoryEntry {
  std::string speaker;
  std::string text;
  bool failed = false;
};

/// Role preamble, the question, then every history entry in order as
/// "[speaker] text". The judge needs a non-empty history.
std::string render_debate_turn(DebateRole role, std::string_view question,
                               std::span<const HistoryEntry> history);

/// Per-test values in [0,1]; nullopt marks a slot that could not be parsed.
struct ParsedScores {
  std::vector<std::optional<double>> values;
  std::vector<std::string> warnings;

  std::size_t failures() const;
};

/// Value drift up to this far outside [0,1] is clamped; more is a failure.
inline constexpr double kClampTolerance = 0.05;

/// The k-th number after the k-th "Output:" token fills slot k.
ParsedScores parse_score_output(std::string_view raw, std::size_t n_tests);

/// Yes/no answer, after an optional "Output:" marker or leading prose.
std::optional<bool> parse_binary_output(std::string_view raw);

}  // namespace hoir
