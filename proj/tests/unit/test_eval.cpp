#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hoir/errors.hpp"
#include "hoir/eval.hpp"
#include "support.hpp"

using namespace hoir;
using hoir::test::make_pair;
using hoir::test::make_set;

namespace {

// Counts, for each GT triplet, the positives that outrank it; it is in the
// top K when fewer than K do.
double counting_oracle(const FramePrediction& frame, const std::vector<std::vector<double>>& scores,
                       const std::vector<GroundTruthTriplet>& gt, double threshold, int k) {
  std::set<GroundTruthTriplet> wanted(gt.begin(), gt.end());
  int hits = 0;
  for (const auto& g : wanted) {
    std::size_t slot = 0;
    while (!(PairKey::of(frame.pairs[slot], slot) == g.pair)) ++slot;
    double s = scores[slot][g.relation];
    if (!(s > threshold)) continue;
    int better = 0;
    for (std::size_t p = 0; p < frame.pairs.size(); ++p)
      for (std::size_t r = 0; r < scores[p].size(); ++r) {
        double o = scores[p][r];
        if (!(o > threshold)) continue;
        PairKey key = PairKey::of(frame.pairs[p], p);
        if (o > s || (o == s && (key < g.pair || (key == g.pair && r < g.relation)))) ++better;
      }
    hits += better < k;
  }
  return static_cast<double>(hits) / wanted.size();
}

}  // namespace

TEST_CASE("recall_at_k_frame examples") {
  PairKey a{PairId{0, 1}, 0};
  std::vector<RankedPrediction> pos{{a, 0, 0.9}, {a, 1, 0.8}, {a, 2, 0.5}};
  std::vector<GroundTruthTriplet> gt{{a, 0}, {a, 1}};
  CHECK(recall_at_k_frame(pos, gt, 10) == 1.0);
  std::vector<RankedPrediction> only_a{{a, 0, 0.9}};
  CHECK(recall_at_k_frame(only_a, gt, 10) == 0.5);
  CHECK(recall_at_k_frame(pos, gt, 1) == 0.5);
  CHECK_THROWS_AS(recall_at_k_frame(pos, {}, 10), NoGroundTruthError);
}

TEST_CASE("ties break on pair key then relation") {
  PairKey lo{PairId{0, 1}, 1}, hi{PairId{0, 2}, 0};
  std::vector<RankedPrediction> pos{{hi, 0, 0.5}, {lo, 3, 0.5}, {lo, 1, 0.5}};
  rank_predictions(pos);
  CHECK(pos[0].pair == lo);
  CHECK(pos[0].relation == 1);
  CHECK(pos[1].relation == 3);
  CHECK(pos[2].pair == hi);
  std::vector<GroundTruthTriplet> gt{{hi, 0}};
  CHECK(recall_at_k_frame(pos, gt, 2) == 0.0);
  CHECK(recall_at_k_frame(pos, gt, 3) == 1.0);
}

TEST_CASE("random frames match the counting oracle and are order independent") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    int n_pairs = 1 + static_cast<int>(rng() % 5);
    int n_rel = 1 + static_cast<int>(rng() % 6);
    FramePrediction frame{0, 640, 480, {}};
    std::vector<std::vector<double>> scores;
    for (int p = 0; p < n_pairs; ++p) {
      frame.pairs.push_back(make_pair(0, PairId{static_cast<std::int64_t>(rng() % 3), p}, "cup",
                                      std::vector<double>(n_rel, 0.0)));
      std::vector<double> row;
      for (int r = 0; r < n_rel; ++r) row.push_back(static_cast<double>(rng() % 11) / 10.0);
      scores.push_back(row);
    }
    std::vector<GroundTruthTriplet> gt;
    int n_gt = 1 + static_cast<int>(rng() % 4);
    for (int g = 0; g < n_gt; ++g) {
      std::size_t p = rng() % n_pairs;
      gt.push_back({PairKey::of(frame.pairs[p], p), rng() % n_rel});
    }
    auto positives = frame_positives(frame, scores, 0.3);
    for (int k : {1, 3, 10}) {
      double got = recall_at_k_frame(positives, gt, k);
      CHECK(got == counting_oracle(frame, scores, gt, 0.3, k));
      auto shuffled = positives;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(recall_at_k_frame(shuffled, gt, k) == got);
    }
    CHECK(recall_at_k_frame(positives, gt, 1) <= recall_at_k_frame(positives, gt, 3));
  }
}

TEST_CASE("dataset mean over frames with ground truth") {
  auto set = make_set({0, 1, 2}, {make_pair(0, PairId{0, 1}, "cup", {0.9, 0.8, 0.1, 0.1})});
  GroundTruthSet gt;
  PairKey key{PairId{0, 1}, 0};
  gt.frames[0] = {{key, 0}, {key, 1}};
  gt.frames[1] = {{key, 0}, {key, 2}};
  auto scores = std::vector<std::vector<std::vector<double>>>(3, {{0.9, 0.8, 0.1, 0.1}});
  auto report = recall_at_k_dataset(set, scores, gt, 0.3);
  CHECK(report.frames_evaluated == 2);
  CHECK(report.percent.at(10) == doctest::Approx(75.0));

  GroundTruthSet single;
  single.frames[1] = {{key, 0}, {key, 2}};
  CHECK(recall_at_k_dataset(set, scores, single, 0.3).percent.at(20) == doctest::Approx(50.0));
  CHECK_THROWS_AS(recall_at_k_dataset(set, scores, GroundTruthSet{}, 0.3), NoGroundTruthError);
}

TEST_CASE("report formats") {
  RecallReport r;
  r.percent = {{10, 52.3214}, {20, 66.0714}, {50, 100.0}};
  r.frames_evaluated = 20;
  std::vector<AblationRow> rows{{true, ComponentToggles::none(), r}, {false, {true, true, false, false}, r}};
  auto table = format_recall_table(rows, kDefaultKs);
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("52.32") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
  auto jsonl = ablation_jsonl(rows, kDefaultKs);
  CHECK(jsonl.find(R"("components":[])") != std::string::npos);
  CHECK(jsonl.find(R"("components":["common_sense","spatial"])") != std::string::npos);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);

  std::vector<AblationRow> only_baseline{rows[0]};
  auto small = format_recall_table(only_baseline, kDefaultKs);
  CHECK(std::count(small.begin(), small.end(), '\n') == 3);
  auto combos = all_toggle_combinations();
  CHECK(combos.size() == 16);
  CHECK(combos.front() == ComponentToggles::none());
  CHECK(combos.back() == ComponentToggles{});
}
