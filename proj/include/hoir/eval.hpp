#pragma once

#include <map>
#include <string>
#include <vector>

#include "hoir/model.hpp"

namespace hoir {

inline const std::vector<int> kDefaultKs = {10, 20, 50};

struct RankedPrediction {
  PairKey pair;
  std::size_t relation = 0;
  double score = 0;
};

/// Semi-Constraint positives of one frame: every (pair, relation) above the threshold.
std::vector<RankedPrediction> frame_positives(const FramePrediction& frame,
                                              const std::vector<std::vector<double>>& scores,
                                              double threshold);

/// Highest score first; ties go to the lower pair key, then the lower relation.
void rank_predictions(std::vector<RankedPrediction>& predictions);

/// |top-K of the positives ∩ gt| / |gt|, a fraction in [0,1]. Throws
/// NoGroundTruthError when `gt` is empty.
double recall_at_k_frame(std::vector<RankedPrediction> positives,
                         const std::vector<GroundTruthTriplet>& gt, int k);

struct RecallReport {
  std::map<int, double> percent;  // K -> mean recall over evaluated frames, in percent
  std::size_t frames_evaluated = 0;
};

/// Mean of per-frame recalls over frames that have ground truth. Throws
/// NoGroundTruthError when no frame has any.
RecallReport recall_at_k_dataset(const VideoPredictionSet& set, const FusedScores& scores,
                                 const GroundTruthSet& gt, double threshold,
                                 const std::vector<int>& ks = kDefaultKs);

struct AblationRow {
  bool baseline = false;
  ComponentToggles toggles = ComponentToggles::none();
  RecallReport recall;

  std::string label() const;
};

/// Aligned text table with a header line noting the frame policy.
std::string format_recall_table(const std::vector<AblationRow>& rows, const std::vector<int>& ks);
/// One JSON record per row: {"components": [...], "baseline": bool, "R@10": ..., ...}.
std::string ablation_jsonl(const std::vector<AblationRow>& rows, const std::vector<int>& ks);

/// Every one of the 16 toggle combinations, all-off first, debate as the lowest bit.
std::vector<ComponentToggles> all_toggle_combinations();

}  // namespace hoir
