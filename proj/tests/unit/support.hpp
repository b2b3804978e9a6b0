#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "hoir/model.hpp"

namespace hoir::test {

inline const std::filesystem::path kFixture = HOIR_FIXTURE_DIR;

/// Fresh empty directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hoir-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RelationVocabulary small_vocab() { return RelationVocabulary({"hold", "ride", "look at", "carry"}); }

inline PairPrediction make_pair(int frame, std::optional<PairId> id, std::string object, std::vector<double> scores,
                                BoundingBox human = {10, 10, 50, 100}, BoundingBox object_box = {12, 80, 55, 140}) {
  return {frame, id, std::move(object), human, object_box, std::move(scores)};
}

/// Tracked set with the given frames, each holding a copy of `pairs` with
/// the frame index filled in.
inline VideoPredictionSet make_set(const std::vector<int>& frames, const std::vector<PairPrediction>& pairs,
                                   RelationVocabulary vocab = small_vocab()) {
  VideoPredictionSet set{"v", std::move(vocab), ScoreScale::probability, {}};
  for (int f : frames) {
    FramePrediction frame{f, 640, 480, pairs};
    for (auto& p : frame.pairs) p.frame_index = f;
    set.frames.push_back(std::move(frame));
  }
  return set;
}

}  // namespace hoir::test
