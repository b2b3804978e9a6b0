#include "hoir/model.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hoir/errors.hpp"

namespace hoir {

RelationVocabulary::RelationVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ValidationError(fmt::format("relation {} has an empty name", i));
    if (!index_.emplace(names_[i], i).second)
      throw ValidationError(fmt::format("duplicate relation name \"{}\"", names_[i]));
  }
}

std::optional<std::size_t> RelationVocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t lookup_relation(const RelationVocabulary& vocab, std::string_view name) {
  if (auto idx = vocab.find(name)) return *idx;
  throw UnknownRelationError(std::string(name));
}

bool VideoPredictionSet::tracked() const {
  for (const auto& frame : frames)
    for (const auto& pair : frame.pairs)
      if (!pair.pair_id) return false;
  return true;
}

std::size_t VideoPredictionSet::pair_count() const {
  std::size_t n = 0;
  for (const auto& frame : frames) n += frame.pairs.size();
  return n;
}

std::optional<std::size_t> VideoPredictionSet::frame_position(int frame_index) const {
  // frames are sorted by index once validated
  std::size_t lo = 0, hi = frames.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (frames[mid].frame_index < frame_index)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < frames.size() && frames[lo].frame_index == frame_index) return lo;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].frame_index == frame_index) return i;
  return std::nullopt;
}

std::string Violation::to_string() const {
  std::string where = frame_index >= 0 ? fmt::format("frame {}", frame_index) : "set";
  if (pair) where += fmt::format(", pair {}", *pair);
  return where + ": " + rule;
}

namespace {

void check_box(const BoundingBox& box, const FramePrediction& frame, std::size_t slot,
               const char* which, std::vector<Violation>& out) {
  if (!(box.x1 < box.x2) || !(box.y1 < box.y2)) {
    out.push_back({frame.frame_index, slot, fmt::format("degenerate {} box", which)});
    return;
  }
  if (box.x1 < 0 || box.y1 < 0 || box.x2 > frame.frame_width || box.y2 > frame.frame_height)
    out.push_back({frame.frame_index, slot, fmt::format("{} box outside frame", which)});
}

}  // namespace

std::vector<Violation> validate_prediction_set(const VideoPredictionSet& set) {
  std::vector<Violation> out;
  const std::size_t n = set.vocabulary.size();
  if (n == 0 && !set.frames.empty()) out.push_back({-1, std::nullopt, "empty relation vocabulary"});

  int previous = -1;
  bool first = true;
  for (const auto& frame : set.frames) {
    if (frame.frame_index < 0) out.push_back({frame.frame_index, std::nullopt, "negative frame index"});
    if (!first && frame.frame_index <= previous)
      out.push_back({frame.frame_index, std::nullopt, "frame indices not strictly increasing"});
    first = false;
    previous = frame.frame_index;
    if (!(frame.frame_width > 0) || !(frame.frame_height > 0))
      out.push_back({frame.frame_index, std::nullopt, "non-positive frame extent"});

    std::set<PairId> seen;
    for (std::size_t slot = 0; slot < frame.pairs.size(); ++slot) {
      const auto& pair = frame.pairs[slot];
      if (pair.frame_index != frame.frame_index)
        out.push_back({frame.frame_index, slot, "pair frame index differs from its frame"});
      if (pair.pair_id && !seen.insert(*pair.pair_id).second)
        out.push_back({frame.frame_index, slot, "duplicate pair id"});
      if (pair.object_class.empty()) out.push_back({frame.frame_index, slot, "empty object class"});
      check_box(pair.human_box, frame, slot, "human", out);
      check_box(pair.object_box, frame, slot, "object", out);
      if (pair.scores.size() != n) {
        out.push_back({frame.frame_index, slot,
                       fmt::format("score vector length {} != vocabulary size {}",
                                   pair.scores.size(), n)});
      }
      for (double s : pair.scores) {
        bool ok = set.scale == ScoreScale::probability ? (s >= 0.0 && s <= 1.0)
                                                       : (std::isfinite(s) && s >= 0.0);
        if (!ok) {
          out.push_back({frame.frame_index, slot,
                         set.scale == ScoreScale::probability ? "score out of [0,1]"
                                                              : "fused score negative or not finite"});
          break;
        }
      }
    }
  }
  return out;
}

std::size_t GroundTruthSet::size() const {
  std::size_t n = 0;
  for (const auto& [_, triplets] : frames) n += triplets.size();
  return n;
}

std::string_view agent_name(Agent agent) {
  switch (agent) {
    case Agent::common_sense: return "common_sense";
    case Agent::spatial: return "spatial";
    case Agent::temporal: return "temporal";
    case Agent::debate: return "debate";
  }
  return "?";
}

std::optional<double>& AgentScores::operator[](Agent agent) {
  switch (agent) {
    case Agent::common_sense: return common_sense;
    case Agent::spatial: return spatial;
    case Agent::temporal: return temporal;
    case Agent::debate: break;
  }
  return debate;
}

const std::optional<double>& AgentScores::operator[](Agent agent) const {
  return const_cast<AgentScores&>(*this)[agent];
}

void AgentScoreTable::set(const ScoreKey& key, Agent agent, double value) {
  if (!(value >= 0.0 && value <= 1.0))
    throw PreconditionError(fmt::format("{} score {} outside [0,1]", agent_name(agent), value));
  entries_[key][agent] = value;
}

std::optional<double> AgentScoreTable::get(const ScoreKey& key, Agent agent) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second[agent];
}

const AgentScores* AgentScoreTable::find(const ScoreKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void AgentScoreTable::merge(const AgentScoreTable& other) {
  for (const auto& [key, scores] : other.entries_) {
    auto& mine = entries_[key];
    for (Agent agent : kAllAgents) {
      const auto& theirs = scores[agent];
      if (!theirs) continue;
      if (mine[agent] && *mine[agent] != *theirs)
        throw Error(fmt::format("conflicting {} scores for frame {}, pair {}, relation {}",
                                agent_name(agent), key.frame_index, key.pair, key.relation));
      mine[agent] = theirs;
    }
  }
}

AgentScoreTable AgentScoreTable::restricted_to(std::initializer_list<Agent> agents) const {
  AgentScoreTable out;
  for (const auto& [key, scores] : entries_) {
    AgentScores kept;
    for (Agent agent : agents) kept[agent] = scores[agent];
    if (!kept.empty()) out.entries_.emplace(key, kept);
  }
  return out;
}

AgentScoreTable AgentScoreTable::without(Agent agent) const {
  AgentScoreTable out;
  for (const auto& [key, scores] : entries_) {
    AgentScores kept = scores;
    kept[agent].reset();
    if (!kept.empty()) out.entries_.emplace(key, kept);
  }
  return out;
}

std::size_t AgentScoreTable::count(Agent agent) const {
  std::size_t n = 0;
  for (const auto& [_, scores] : entries_) n += scores[agent].has_value();
  return n;
}

std::vector<Violation> validate_score_table(const AgentScoreTable& table,
                                            const VideoPredictionSet& set) {
  std::vector<Violation> out;
  for (const auto& [key, scores] : table) {
    auto pos = set.frame_position(key.frame_index);
    if (!pos) {
      out.push_back({key.frame_index, std::nullopt, "score for a frame absent from the set"});
      continue;
    }
    const auto& frame = set.frames[*pos];
    if (key.pair >= frame.pairs.size()) {
      out.push_back({key.frame_index, key.pair, "score for a pair absent from the frame"});
      continue;
    }
    if (key.relation >= set.vocabulary.size())
      out.push_back({key.frame_index, key.pair, "score relation index out of range"});
    for (Agent agent : kAllAgents) {
      const auto& v = scores[agent];
      if (v && !(*v >= 0.0 && *v <= 1.0))
        out.push_back({key.frame_index, key.pair, "agent score out of [0,1]"});
    }
  }
  return out;
}

double FusionWeights::weight(Agent agent) const {
  switch (agent) {
    case Agent::common_sense: return lambda_cs;
    case Agent::spatial: return lambda_s;
    case Agent::temporal: return lambda_t;
    case Agent::debate: return lambda_debate;
  }
  return 0.0;
}

void FusionWeights::validate() const {
  for (Agent agent : kAllAgents) {
    double w = weight(agent);
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ValidationError(fmt::format("weight for {} must be a finite value >= 0", agent_name(agent)));
  }
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError(fmt::format("threshold {} outside (0,1)", threshold));
}

bool ComponentToggles::enabled(Agent agent) const {
  switch (agent) {
    case Agent::common_sense: return common_sense;
    case Agent::spatial: return spatial;
    case Agent::temporal: return temporal;
    case Agent::debate: return debate;
  }
  return false;
}

std::string ComponentToggles::label() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += name;
  };
  add(common_sense, "cs");
  add(spatial, "spatial");
  add(temporal, "temporal");
  add(debate, "debate");
  return out.empty() ? "none" : out;
}

}  // namespace hoir
