#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hoir/model.hpp"

namespace hoir {

/// One relation name per line; the line number (from 0) is the index.
/// Names are lower-cased; blank lines are skipped.
RelationVocabulary load_vocabulary(const std::filesystem::path& path);
RelationVocabulary parse_vocabulary(std::string_view text);

/// Line-delimited JSON, one pair per line:
///   {"video_id", "frame_index", "frame_w", "frame_h",
///    "pair_id": {"human_id", "object_id"} | null, "object_class",
///    "human_box": [x1,y1,x2,y2], "object_box": [...], "scores": [N reals]}
/// An optional "score_scale": "fused" marks refined output. Records of a
/// frame must be contiguous. Throws ParseError with a line/field location,
/// or ValidationError with the first violated invariant.
VideoPredictionSet load_predictions(const std::filesystem::path& path,
                                    const RelationVocabulary& vocab);
VideoPredictionSet parse_predictions(std::string_view text, const RelationVocabulary& vocab);

/// Line-delimited JSON: {"frame_index", "pair_id": {...} | null,
/// "pair_index"?, "relation_index"}. "pair_index" addresses a pair by its
/// position in the frame when the video is untracked. Every triplet must
/// reference a pair of `predictions` (DanglingReferenceError otherwise).
GroundTruthSet load_ground_truth(const std::filesystem::path& path,
                                 const VideoPredictionSet& predictions);
GroundTruthSet parse_ground_truth(std::string_view text, const VideoPredictionSet& predictions);

/// "<person,RELATION,OBJECT>" with lower-case labels and no spaces
/// around the commas.
std::string triplet_text(std::string_view relation, std::string_view object_class);
std::string triplet_to_text(const PairPrediction& pair, std::size_t relation,
                            const RelationVocabulary& vocab);

/// Copy of `set` with `fused` in place of the base scores and the fused scale.
VideoPredictionSet with_scores(const VideoPredictionSet& set, const FusedScores& fused);

/// Writes `set` with `fused` scores; the output loads back bit-exact.
/// Throws PreconditionError when `fused` does not cover the set, IoError on write failure.
void write_predictions(const VideoPredictionSet& set, const FusedScores& fused,
                       const std::filesystem::path& path);
std::string serialize_predictions(const VideoPredictionSet& set);

/// Same layout as load_ground_truth reads.
std::string serialize_ground_truth(const GroundTruthSet& gt);

std::string to_lower(std::string_view text);
std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace hoir
