#include "hoir/eval.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "hoir/errors.hpp"

namespace hoir {

std::vector<RankedPrediction> frame_positives(const FramePrediction& frame,
                                              const std::vector<std::vector<double>>& scores,
                                              double threshold) {
  if (scores.size() != frame.pairs.size())
    throw PreconditionError(fmt::format("frame {}: {} score rows for {} pairs", frame.frame_index,
                                        scores.size(), frame.pairs.size()));
  std::vector<RankedPrediction> out;
  for (std::size_t p = 0; p < frame.pairs.size(); ++p)
    for (std::size_t r = 0; r < scores[p].size(); ++r)
      if (scores[p][r] > threshold) out.push_back({PairKey::of(frame.pairs[p], p), r, scores[p][r]});
  return out;
}

void rank_predictions(std::vector<RankedPrediction>& predictions) {
  std::sort(predictions.begin(), predictions.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.pair != b.pair) return a.pair < b.pair;
    return a.relation < b.relation;
  });
}

double recall_at_k_frame(std::vector<RankedPrediction> positives,
                         const std::vector<GroundTruthTriplet>& gt, int k) {
  if (gt.empty()) throw NoGroundTruthError("frame has no ground-truth triplets");
  if (k < 1) throw PreconditionError("K must be at least 1");
  rank_predictions(positives);
  std::set<GroundTruthTriplet> wanted(gt.begin(), gt.end());
  const std::size_t total = wanted.size();
  std::size_t hits = 0;
  std::size_t top = std::min(positives.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < top; ++i)
    hits += wanted.erase(GroundTruthTriplet{positives[i].pair, positives[i].relation});
  return static_cast<double>(hits) / static_cast<double>(total);
}

RecallReport recall_at_k_dataset(const VideoPredictionSet& set, const FusedScores& scores,
                                 const GroundTruthSet& gt, double threshold,
                                 const std::vector<int>& ks) {
  if (scores.size() != set.frames.size()) throw PreconditionError("score grid does not cover the set");
  std::map<int, double> sums;
  RecallReport report;
  for (std::size_t f = 0; f < set.frames.size(); ++f) {
    auto it = gt.frames.find(set.frames[f].frame_index);
    if (it == gt.frames.end() || it->second.empty()) continue;
    auto positives = frame_positives(set.frames[f], scores[f], threshold);
    for (int k : ks) sums[k] += recall_at_k_frame(positives, it->second, k);
    ++report.frames_evaluated;
  }
  if (report.frames_evaluated == 0) throw NoGroundTruthError("no frame has ground-truth triplets");
  for (int k : ks) report.percent[k] = 100.0 * sums[k] / static_cast<double>(report.frames_evaluated);
  return report;
}

std::string AblationRow::label() const { return baseline ? "baseline" : toggles.label(); }

std::string format_recall_table(const std::vector<AblationRow>& rows, const std::vector<int>& ks) {
  std::size_t width = 10;
  for (const auto& row : rows) width = std::max(width, row.label().size());
  std::string out = "# mean over frames with ground truth; frames without any are excluded\n";
  out += fmt::format("{:<{}}", "components", width);
  for (int k : ks) out += fmt::format("  {:>7}", fmt::format("R@{}", k));
  out += '\n';
  for (const auto& row : rows) {
    out += fmt::format("{:<{}}", row.label(), width);
    for (int k : ks) out += fmt::format("  {:>7.2f}", row.recall.percent.at(k));
    out += '\n';
  }
  return out;
}

std::string ablation_jsonl(const std::vector<AblationRow>& rows, const std::vector<int>& ks) {
  std::string out;
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    auto components = nlohmann::json::array();
    if (!row.baseline)
      for (Agent agent : kAllAgents)
        if (row.toggles.enabled(agent)) components.push_back(agent_name(agent));
    j["components"] = components;
    j["baseline"] = row.baseline;
    for (int k : ks) j[fmt::format("R@{}", k)] = row.recall.percent.at(k);
    j["frames"] = row.recall.frames_evaluated;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ComponentToggles> all_toggle_combinations() {
  std::vector<ComponentToggles> out;
  for (int bits = 0; bits < 16; ++bits)
    out.push_back({(bits & 8) != 0, (bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0});
  return out;
}

}  // namespace hoir
