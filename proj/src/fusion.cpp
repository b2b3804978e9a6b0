#include "hoir/fusion.hpp"

#include <cmath>

namespace hoir {

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double fuse_scores(double s_inter, const AgentScores& scores, const FusionWeights& weights) {
  double fused = s_inter;
  for (Agent agent : kAllAgents)
    if (const auto& s = scores[agent]) fused += weights.weight(agent) * sigmoid(*s);
  return fused;
}

std::vector<std::size_t> threshold_select(const std::vector<double>& pair_scores, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < pair_scores.size(); ++r)
    if (pair_scores[r] > threshold) out.push_back(r);
  return out;
}

FusedScores base_scores(const VideoPredictionSet& set) {
  FusedScores out(set.frames.size());
  for (std::size_t f = 0; f < set.frames.size(); ++f)
    for (const auto& pair : set.frames[f].pairs) out[f].push_back(pair.scores);
  return out;
}

FusedScores fuse_all(const VideoPredictionSet& set, const AgentScoreTable& table,
                     const FusionWeights& weights, const ComponentToggles& toggles) {
  FusedScores out = base_scores(set);
  for (std::size_t f = 0; f < set.frames.size(); ++f) {
    const auto& frame = set.frames[f];
    for (std::size_t p = 0; p < frame.pairs.size(); ++p) {
      for (std::size_t r = 0; r < frame.pairs[p].scores.size(); ++r) {
        const AgentScores* found = table.find({frame.frame_index, p, r});
        if (!found) continue;
        AgentScores active;
        for (Agent agent : kAllAgents)
          if (toggles.enabled(agent)) active[agent] = (*found)[agent];
        out[f][p][r] = fuse_scores(frame.pairs[p].scores[r], active, weights);
      }
    }
  }
  return out;
}

}  // namespace hoir
