#pragma once

#include <vector>

#include "hoir/model.hpp"

namespace hoir {

double sigmoid(double x);

/// s_inter plus lambda * sigmoid(s) for every present agent score. Absent
/// scores contribute nothing at all. The result is not clipped.
double fuse_scores(double s_inter, const AgentScores& scores, const FusionWeights& weights);

/// Relation indices whose fused score is strictly above `threshold`.
std::vector<std::size_t> threshold_select(const std::vector<double>& pair_scores, double threshold);

/// Fused score grid for the whole set. Agents switched off in `toggles`
/// are ignored even when the table holds scores for them.
FusedScores fuse_all(const VideoPredictionSet& set, const AgentScoreTable& table,
                     const FusionWeights& weights, const ComponentToggles& toggles = {});

/// The base scores as a grid, for baseline evaluation.
FusedScores base_scores(const VideoPredictionSet& set);

}  // namespace hoir
