#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hoir {

/// Ordered relation labels; index <-> name is a bijection.
class RelationVocabulary {
 public:
  RelationVocabulary() = default;
  /// Throws ValidationError on empty or duplicate names.
  explicit RelationVocabulary(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> find(std::string_view name) const;

  friend bool operator==(const RelationVocabulary& a, const RelationVocabulary& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws UnknownRelationError when `name` is not in the vocabulary.
std::size_t lookup_relation(const RelationVocabulary& vocab, std::string_view name);

/// Absolute pixel coordinates.
struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct PairId {
  std::int64_t human_id = 0;
  std::int64_t object_id = 0;
  friend auto operator<=>(const PairId&, const PairId&) = default;
};

struct PairPrediction {
  int frame_index = 0;
  std::optional<PairId> pair_id;
  std::string object_class;
  BoundingBox human_box;
  BoundingBox object_box;
  std::vector<double> scores;

  friend bool operator==(const PairPrediction&, const PairPrediction&) = default;
};

struct FramePrediction {
  int frame_index = 0;
  double frame_width = 0;
  double frame_height = 0;
  std::vector<PairPrediction> pairs;

  friend bool operator==(const FramePrediction&, const FramePrediction&) = default;
};

/// Base detector confidences live in [0,1]; refined (fused) scores are
/// unbounded above.
enum class ScoreScale { probability, fused };

struct VideoPredictionSet {
  std::string video_id;
  RelationVocabulary vocabulary;
  ScoreScale scale = ScoreScale::probability;
  std::vector<FramePrediction> frames;

  /// True when every pair carries a tracking id.
  bool tracked() const;
  std::size_t pair_count() const;
  /// Position of the frame with this index, if any.
  std::optional<std::size_t> frame_position(int frame_index) const;

  friend bool operator==(const VideoPredictionSet&, const VideoPredictionSet&) = default;
};

struct Violation {
  int frame_index = -1;
  std::optional<std::size_t> pair;
  std::string rule;

  std::string to_string() const;
};

std::vector<Violation> validate_prediction_set(const VideoPredictionSet& set);

/// Identifies a pair within its frame: the tracking id when present,
/// otherwise the position of the pair in the frame.
struct PairKey {
  std::optional<PairId> id;
  std::size_t slot = 0;

  static PairKey of(const PairPrediction& pair, std::size_t slot) { return {pair.pair_id, slot}; }

  friend bool operator==(const PairKey& a, const PairKey& b) {
    if (a.id.has_value() != b.id.has_value()) return false;
    return a.id ? *a.id == *b.id : a.slot == b.slot;
  }
  friend std::strong_ordering operator<=>(const PairKey& a, const PairKey& b) {
    if (a.id.has_value() != b.id.has_value()) return a.id.has_value() <=> b.id.has_value();
    if (a.id) return *a.id <=> *b.id;
    return a.slot <=> b.slot;
  }
};

struct GroundTruthTriplet {
  PairKey pair;
  std::size_t relation = 0;
  friend auto operator<=>(const GroundTruthTriplet&, const GroundTruthTriplet&) = default;
  friend bool operator==(const GroundTruthTriplet&, const GroundTruthTriplet&) = default;
};

/// Positive triplets per frame index.
struct GroundTruthSet {
  std::map<int, std::vector<GroundTruthTriplet>> frames;

  std::size_t size() const;
};

/// (frame, pair slot within the frame, relation). Pair slots index
/// FramePrediction::pairs so untracked videos are addressable too.
struct ScoreKey {
  int frame_index = 0;
  std::size_t pair = 0;
  std::size_t relation = 0;
  friend auto operator<=>(const ScoreKey&, const ScoreKey&) = default;
};

enum class Agent { common_sense, spatial, temporal, debate };

inline constexpr Agent kAllAgents[] = {Agent::common_sense, Agent::spatial, Agent::temporal,
                                       Agent::debate};

std::string_view agent_name(Agent agent);

struct AgentScores {
  std::optional<double> common_sense;
  std::optional<double> spatial;
  std::optional<double> temporal;
  std::optional<double> debate;

  std::optional<double>& operator[](Agent agent);
  const std::optional<double>& operator[](Agent agent) const;
  bool empty() const { return !common_sense && !spatial && !temporal && !debate; }
  friend bool operator==(const AgentScores&, const AgentScores&) = default;
};

/// Sparse per-agent raw scores, each in [0,1] when present.
class AgentScoreTable {
 public:
  using Map = std::map<ScoreKey, AgentScores>;

  /// Throws PreconditionError for values outside [0,1].
  void set(const ScoreKey& key, Agent agent, double value);
  std::optional<double> get(const ScoreKey& key, Agent agent) const;
  const AgentScores* find(const ScoreKey& key) const;

  /// Adds every score of `other`. A key/agent present on both sides with
  /// different values is a logic error (batches have disjoint keys).
  void merge(const AgentScoreTable& other);
  /// Copy with only the listed agents kept.
  AgentScoreTable restricted_to(std::initializer_list<Agent> agents) const;
  AgentScoreTable without(Agent agent) const;

  std::size_t count(Agent agent) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  friend bool operator==(const AgentScoreTable&, const AgentScoreTable&) = default;

 private:
  Map entries_;
};

/// Checks that every key references an existing (frame, pair, relation).
std::vector<Violation> validate_score_table(const AgentScoreTable& table,
                                            const VideoPredictionSet& set);

struct FusionWeights {
  double lambda_cs = 0.05;
  double lambda_s = 1.7;
  double lambda_t = 1.7;
  double lambda_debate = 0.2;
  double threshold = 0.3;

  double weight(Agent agent) const;
  /// Throws ValidationError when a weight is negative or the threshold is outside (0,1).
  void validate() const;
};

/// Which refinement components are active for a run.
struct ComponentToggles {
  bool common_sense = true;
  bool spatial = true;
  bool temporal = true;
  bool debate = true;

  static ComponentToggles none() { return {false, false, false, false}; }
  bool enabled(Agent agent) const;
  std::string label() const;
  friend bool operator==(const ComponentToggles&, const ComponentToggles&) = default;
};

/// Per frame position, per pair, per relation: the full score grid of a set.
using FusedScores = std::vector<std::vector<std::vector<double>>>;

}  // namespace hoir
