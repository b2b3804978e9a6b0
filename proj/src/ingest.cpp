#include "hoir/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hoir/errors.hpp"

namespace hoir {

using nlohmann::json;

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error reading {}", path.string()));
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += fmt::format(".{:08x}.tmp", std::random_device{}());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError(fmt::format("error writing {}", path.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("cannot write {}", path.string()));
  }
}

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = std::all_of(line.begin(), line.end(),
                             [](unsigned char c) { return std::isspace(c); });
    if (!blank) fn(line_no, line);
    if (end == text.size()) break;
    start = end + 1;
  }
}

std::string where(std::size_t line, std::string_view field = {}) {
  return field.empty() ? fmt::format("line {}", line) : fmt::format("line {}, field {}", line, field);
}

json parse_record(std::size_t line_no, std::string_view line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(where(line_no), "record is not a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(where(line_no), fmt::format("invalid JSON ({})", e.what()));
  }
}

const json& field(const json& record, const char* name, std::size_t line_no) {
  auto it = record.find(name);
  if (it == record.end()) throw ParseError(where(line_no, name), "missing field");
  return *it;
}

double number_field(const json& value, std::size_t line_no, std::string_view name) {
  if (!value.is_number()) throw ParseError(where(line_no, name), "expected a number");
  return value.get<double>();
}

int int_field(const json& value, std::size_t line_no, std::string_view name) {
  if (!value.is_number_integer()) throw ParseError(where(line_no, name), "expected an integer");
  return value.get<int>();
}

std::string string_field(const json& value, std::size_t line_no, std::string_view name) {
  if (!value.is_string()) throw ParseError(where(line_no, name), "expected a string");
  return value.get<std::string>();
}

BoundingBox box_field(const json& value, std::size_t line_no, std::string_view name) {
  if (!value.is_array() || value.size() != 4)
    throw ParseError(where(line_no, name), "expected [x1,y1,x2,y2]");
  BoundingBox b;
  b.x1 = number_field(value[0], line_no, name);
  b.y1 = number_field(value[1], line_no, name);
  b.x2 = number_field(value[2], line_no, name);
  b.y2 = number_field(value[3], line_no, name);
  return b;
}

std::optional<PairId> pair_id_field(const json& record, std::size_t line_no) {
  auto it = record.find("pair_id");
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_object()) throw ParseError(where(line_no, "pair_id"), "expected an object or null");
  PairId id;
  auto get = [&](const char* key) -> std::int64_t {
    auto f = it->find(key);
    if (f == it->end() || !f->is_number_integer())
      throw ParseError(where(line_no, std::string("pair_id.") + key), "expected an integer");
    return f->get<std::int64_t>();
  };
  id.human_id = get("human_id");
  id.object_id = get("object_id");
  return id;
}

json box_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

void throw_first_violation(const std::vector<Violation>& violations) {
  if (!violations.empty()) throw ValidationError(violations.front().to_string());
}

}  // namespace

RelationVocabulary parse_vocabulary(std::string_view text) {
  std::vector<std::string> names;
  for_each_line(text, [&](std::size_t, std::string_view line) {
    auto b = line.find_first_not_of(" \t");
    auto e = line.find_last_not_of(" \t");
    names.push_back(to_lower(line.substr(b, e - b + 1)));
  });
  return RelationVocabulary(std::move(names));
}

RelationVocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_text_file(path));
}

VideoPredictionSet parse_predictions(std::string_view text, const RelationVocabulary& vocab) {
  VideoPredictionSet set;
  set.vocabulary = vocab;
  bool first = true;
  std::set<int> closed_frames;

  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    json record = parse_record(line_no, line);

    std::string video_id = string_field(field(record, "video_id", line_no), line_no, "video_id");
    ScoreScale scale = ScoreScale::probability;
    if (auto it = record.find("score_scale"); it != record.end()) {
      std::string s = string_field(*it, line_no, "score_scale");
      if (s == "fused")
        scale = ScoreScale::fused;
      else if (s != "probability")
        throw ParseError(where(line_no, "score_scale"), "expected \"probability\" or \"fused\"");
    }
    if (first) {
      set.video_id = video_id;
      set.scale = scale;
      first = false;
    } else if (video_id != set.video_id) {
      throw ParseError(where(line_no, "video_id"),
                       fmt::format("mixes videos \"{}\" and \"{}\"", set.video_id, video_id));
    } else if (scale != set.scale) {
      throw ParseError(where(line_no, "score_scale"), "mixes score scales");
    }

    PairPrediction pair;
    pair.frame_index = int_field(field(record, "frame_index", line_no), line_no, "frame_index");
    double width = number_field(field(record, "frame_w", line_no), line_no, "frame_w");
    double height = number_field(field(record, "frame_h", line_no), line_no, "frame_h");
    pair.pair_id = pair_id_field(record, line_no);
    pair.object_class = to_lower(string_field(field(record, "object_class", line_no), line_no, "object_class"));
    pair.human_box = box_field(field(record, "human_box", line_no), line_no, "human_box");
    pair.object_box = box_field(field(record, "object_box", line_no), line_no, "object_box");

    const json& scores = field(record, "scores", line_no);
    if (!scores.is_array()) throw ParseError(where(line_no, "scores"), "expected an array");
    pair.scores.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      pair.scores.push_back(number_field(scores[i], line_no, fmt::format("scores[{}]", i)));
    if (pair.scores.size() != vocab.size())
      throw ParseError(where(line_no, "scores"),
                       fmt::format("has {} entries, vocabulary has {}", pair.scores.size(), vocab.size()));

    if (set.frames.empty() || set.frames.back().frame_index != pair.frame_index) {
      if (!set.frames.empty()) closed_frames.insert(set.frames.back().frame_index);
      if (closed_frames.count(pair.frame_index))
        throw ParseError(where(line_no, "frame_index"),
                         fmt::format("records of frame {} are not contiguous", pair.frame_index));
      set.frames.push_back({pair.frame_index, width, height, {}});
    } else if (set.frames.back().frame_width != width || set.frames.back().frame_height != height) {
      throw ParseError(where(line_no, "frame_w"), "frame extent differs from earlier records");
    }
    set.frames.back().pairs.push_back(std::move(pair));
  });

  throw_first_violation(validate_prediction_set(set));
  return set;
}

VideoPredictionSet load_predictions(const std::filesystem::path& path, const RelationVocabulary& vocab) {
  return parse_predictions(read_text_file(path), vocab);
}

GroundTruthSet parse_ground_truth(std::string_view text, const VideoPredictionSet& predictions) {
  GroundTruthSet gt;
  const std::size_t n = predictions.vocabulary.size();
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    json record = parse_record(line_no, line);
    int frame_index = int_field(field(record, "frame_index", line_no), line_no, "frame_index");
    const json& rel = field(record, "relation_index", line_no);
    if (!rel.is_number_integer()) throw ParseError(where(line_no, "relation_index"), "expected an integer");
    long long relation = rel.get<long long>();
    if (relation < 0 || static_cast<std::size_t>(relation) >= n)
      throw ValidationError(fmt::format("{}: relation_index {} out of range [0,{})",
                                        where(line_no, "relation_index"), relation, n));

    auto pos = predictions.frame_position(frame_index);
    if (!pos)
      throw DanglingReferenceError(
          fmt::format("{}: frame {} has no predictions", where(line_no, "frame_index"), frame_index));
    const auto& frame = predictions.frames[*pos];

    std::optional<PairId> id = pair_id_field(record, line_no);
    std::optional<std::size_t> slot;
    if (id) {
      for (std::size_t i = 0; i < frame.pairs.size(); ++i)
        if (frame.pairs[i].pair_id == id) slot = i;
      if (!slot)
        throw DanglingReferenceError(fmt::format("{}: pair ({}, {}) missing from frame {}",
                                                 where(line_no, "pair_id"), id->human_id,
                                                 id->object_id, frame_index));
    } else {
      auto it = record.find("pair_index");
      if (it == record.end() || !it->is_number_integer())
        throw ParseError(where(line_no, "pair_index"), "needed when pair_id is null");
      long long idx = it->get<long long>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= frame.pairs.size())
        throw DanglingReferenceError(fmt::format("{}: pair {} missing from frame {}",
                                                 where(line_no, "pair_index"), idx, frame_index));
      slot = static_cast<std::size_t>(idx);
    }

    GroundTruthTriplet triplet{PairKey::of(frame.pairs[*slot], *slot), static_cast<std::size_t>(relation)};
    auto& list = gt.frames[frame_index];
    if (std::find(list.begin(), list.end(), triplet) == list.end()) list.push_back(triplet);
  });
  for (auto& [_, list] : gt.frames) std::sort(list.begin(), list.end());
  return gt;
}

GroundTruthSet load_ground_truth(const std::filesystem::path& path, const VideoPredictionSet& predictions) {
  return parse_ground_truth(read_text_file(path), predictions);
}

std::string triplet_text(std::string_view relation, std::string_view object_class) {
  return fmt::format("<person,{},{}>", to_lower(relation), to_lower(object_class));
}

std::string triplet_to_text(const PairPrediction& pair, std::size_t relation, const RelationVocabulary& vocab) {
  return triplet_text(vocab.name(relation), pair.object_class);
}

VideoPredictionSet with_scores(const VideoPredictionSet& set, const FusedScores& fused) {
  if (fused.size() != set.frames.size())
    throw PreconditionError("fused scores do not cover every frame");
  VideoPredictionSet out = set;
  out.scale = ScoreScale::fused;
  for (std::size_t f = 0; f < out.frames.size(); ++f) {
    auto& pairs = out.frames[f].pairs;
    if (fused[f].size() != pairs.size())
      throw PreconditionError(fmt::format("fused scores do not cover frame {}", out.frames[f].frame_index));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (fused[f][p].size() != set.vocabulary.size())
        throw PreconditionError(fmt::format("fused scores do not cover every relation of frame {}, pair {}",
                                            out.frames[f].frame_index, p));
      pairs[p].scores = fused[f][p];
    }
  }
  return out;
}

std::string serialize_predictions(const VideoPredictionSet& set) {
  std::string out;
  for (const auto& frame : set.frames) {
    for (const auto& pair : frame.pairs) {
      json j = json::object();
      j["video_id"] = set.video_id;
      j["frame_index"] = pair.frame_index;
      j["frame_w"] = frame.frame_width;
      j["frame_h"] = frame.frame_height;
      if (pair.pair_id)
        j["pair_id"] = {{"human_id", pair.pair_id->human_id}, {"object_id", pair.pair_id->object_id}};
      else
        j["pair_id"] = nullptr;
      j["object_class"] = pair.object_class;
      j["human_box"] = box_json(pair.human_box);
      j["object_box"] = box_json(pair.object_box);
      j["scores"] = pair.scores;
      if (set.scale == ScoreScale::fused) j["score_scale"] = "fused";
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

void write_predictions(const VideoPredictionSet& set, const FusedScores& fused,
                       const std::filesystem::path& path) {
  write_text_file(path, serialize_predictions(with_scores(set, fused)));
}

std::string serialize_ground_truth(const GroundTruthSet& gt) {
  std::string out;
  for (const auto& [frame_index, triplets] : gt.frames) {
    for (const auto& t : triplets) {
      json j = json::object();
      j["frame_index"] = frame_index;
      if (t.pair.id) {
        j["pair_id"] = {{"human_id", t.pair.id->human_id}, {"object_id", t.pair.id->object_id}};
      } else {
        j["pair_id"] = nullptr;
        j["pair_index"] = t.pair.slot;
      }
      j["relation_index"] = t.relation;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace hoir
