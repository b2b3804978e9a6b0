#include "hoir/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "hoir/errors.hpp"

namespace hoir {

const std::string_view kCommonSenseInstruction =
    "You are an agent to give scores for all input examples based on their common sense "
    "rationality. Each input example is in the format <person, relation, object>. Your task is "
    "to score each input example based on the rationality of the relation between the person "
    "and the object. The output scores are between 0 and 1. Given an input example, you output "
    "the score. Please think step by step and then give the answer.";

const std::string_view kSpatialAwarenessInstruction =
    "You are an agent to decide whether a relation between a person and an object is "
    "spatial-aware. A relation is spatial-aware when it constrains where the person and the "
    "object can be in the image, for example \"ride\" needs the person on top of the object. A "
    "relation that holds from any position, for example \"look at\", is not spatial-aware. Given "
    "an input relation, you output yes or no. Please think step by step and then give the "
    "answer.";

const std::string_view kSpatialScoringInstruction =
    "You are an agent to give scores for all input examples based on their spatial "
    "rationality. Each input example is in the format <person, relation, object> followed by "
    "the person box and the object box as [x1,y1,x2,y2] image pixels, with y growing downwards. "
    "Your task is to score whether the relation is plausible given where the person and the "
    "object are located. The output scores are between 0 and 1. Given an input example, you "
    "output the score. Please think step by step and then give the answer.";

const std::string_view kTemporalInstruction =
    "You are an agent to give scores for all input examples based on their temporal "
    "rationality. Each input example gives the <person, relation, object> triplet predicted for "
    "the same person and object at frame i and at the next frame i+1. Your task is to score "
    "whether this change of relation between the two frames is reasonable. The output scores "
    "are between 0 and 1. Given an input example, you output the score. Please think step by "
    "step and then give the answer.";

const std::string_view kDebaterPreamble =
    "You are a debater among a panel of agents, each of whom will give their responses to the "
    "posed question in a debate setting. You do not need to fully agree with each other's "
    "perspectives, as our objective is to discuss and find the most reasonable answer. Please "
    "share your opinions in brief.";

const std::string_view kJudgePreamble =
    "You are a moderator. There will be three debaters involved in discussing a question. They "
    "will present their answers and discuss their perspectives on the correct answer. At the "
    "end of the debate, you will be responsible for deciding which answer is the most "
    "reasonable one based on the debate content.";

std::string PromptBundle::render() const {
  std::string out(instruction);
  if (!demonstrations.empty()) {
    out += "\n\n";
    for (std::size_t i = 0; i < demonstrations.size(); ++i) {
      if (i) out += '\n';
      out += fmt::format("Input:{} Output: {}", demonstrations[i].input, demonstrations[i].output);
    }
  }
  if (!tests.empty()) {
    out += "\n\n";
    for (std::size_t i = 0; i < tests.size(); ++i) {
      if (i) out += '\n';
      out += fmt::format("Input: {} Output:", tests[i]);
    }
  }
  return out;
}

PromptBundle render_common_sense(std::span<const std::string> tests) {
  if (tests.empty()) throw PreconditionError("common-sense prompt needs at least one test");
  return {std::string(kCommonSenseInstruction),
          {{"<person,sit on,chair>", "1.0"},
           {"<person,sit on,table>", "0.6"},
           {"<person,hug,table>", "0.1"},
           {"<person,ride,elephant>", "0.7"},
           {"<person,ride,bicycle>", "1.0"}},
          {tests.begin(), tests.end()}};
}

std::string box_text(const BoundingBox& box) {
  auto r = [](double v) { return static_cast<long long>(std::llround(v)); };
  return fmt::format("[{},{},{},{}]", r(box.x1), r(box.y1), r(box.x2), r(box.y2));
}

std::string spatial_test_input(const SpatialQuery& query) {
  return fmt::format("{} person box {}, object box {}", query.triplet, box_text(query.human_box),
                     box_text(query.object_box));
}

PromptBundle render_spatial_awareness(std::span<const std::string> relations) {
  if (relations.empty()) throw PreconditionError("spatial awareness prompt needs a relation");
  return {std::string(kSpatialAwarenessInstruction),
          {{"ride", "yes"}, {"look at", "no"}, {"sit on", "yes"}, {"talk to", "no"}},
          {relations.begin(), relations.end()}};
}

PromptBundle render_spatial_scoring(std::span<const SpatialQuery> queries) {
  if (queries.empty()) throw PreconditionError("spatial scoring prompt needs at least one test");
  PromptBundle bundle{std::string(kSpatialScoringInstruction),
                      {{"<person,ride,bicycle> person box [210,40,330,260], object box [190,170,370,400]", "1.0"},
                       {"<person,ride,bicycle> person box [20,60,140,400], object box [200,220,420,420]", "0.0"},
                       {"<person,sit on,chair> person box [300,80,420,380], object box [290,240,430,460]", "1.0"},
                       {"<person,sit on,chair> person box [40,50,150,420], object box [400,260,520,460]", "0.1"}},
                      {}};
  for (const auto& q : queries) bundle.tests.push_back(spatial_test_input(q));
  return bundle;
}

std::string temporal_test_input(const TransitionText& transition) {
  return fmt::format("frame i: {}; frame i+1: {}", transition.before, transition.after);
}

PromptBundle render_temporal(std::span<const TransitionText> transitions) {
  if (transitions.empty()) throw PreconditionError("temporal prompt needs at least one transition");
  PromptBundle bundle{std::string(kTemporalInstruction),
                      {{"frame i: <person,hold,cup>; frame i+1: <person,drink from,cup>", "0.9"},
                       {"frame i: <person,ride,horse>; frame i+1: <person,lean on,horse>", "0.2"},
                       {"frame i: <person,sit on,sofa>; frame i+1: <person,lie on,sofa>", "0.8"}},
                      {}};
  for (const auto& t : transitions) {
    if (t.before == t.after)
      throw PreconditionError(fmt::format("transition {} keeps the same triplet", t.before));
    bundle.tests.push_back(temporal_test_input(t));
  }
  return bundle;
}

std::string render_debate_turn(DebateRole role, std::string_view question,
                               std::span<const HistoryEntry> history) {
  if (role == DebateRole::judge && history.empty())
    throw PreconditionError("the judge needs a non-empty debate history");
  std::string out(role == DebateRole::judge ? kJudgePreamble : kDebaterPreamble);
  out += "\n\nQuestion: ";
  out += question;
  if (!history.empty()) {
    out += "\n\nDebate history:";
    for (const auto& entry : history)
      out += fmt::format("\n[{}] {}", entry.speaker, entry.failed ? "(no response)" : entry.text);
  }
  return out;
}

std::size_t ParsedScores::failures() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::nullopt));
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Leading number of `text` after optional spaces; nullopt if none.
std::optional<double> leading_number(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  if (i < text.size() && text[i] == '+') ++i;
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), value);
  if (ec != std::errc() || ptr == text.data() + i || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

ParsedScores parse_score_output(std::string_view raw, std::size_t n_tests) {
  if (n_tests == 0) throw PreconditionError("parse_score_output needs n_tests >= 1");
  ParsedScores parsed;
  parsed.values.assign(n_tests, std::nullopt);

  const std::string folded = lower(raw);
  constexpr std::string_view kToken = "output:";
  std::vector<std::optional<double>> found;
  for (std::size_t pos = folded.find(kToken); pos != std::string::npos;
       pos = folded.find(kToken, pos + kToken.size()))
    found.push_back(leading_number(raw.substr(pos + kToken.size())));

  if (found.empty() && n_tests == 1) {
    auto b = raw.find_first_not_of(" \t\r\n");
    auto e = raw.find_last_not_of(" \t\r\n");
    if (b != std::string_view::npos) {
      std::string_view body = raw.substr(b, e - b + 1);
      double value = 0;
      auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
      if (ec == std::errc() && ptr == body.data() + body.size()) found.push_back(value);
    }
  }

  for (std::size_t k = 0; k < n_tests && k < found.size(); ++k) {
    if (!found[k]) continue;
    double v = *found[k];
    if (v >= 0.0 && v <= 1.0) {
      parsed.values[k] = v;
    } else if (v >= -kClampTolerance && v <= 1.0 + kClampTolerance) {
      parsed.values[k] = std::clamp(v, 0.0, 1.0);
      parsed.warnings.push_back(fmt::format("slot {}: clamped {} into [0,1]", k, v));
    } else {
      parsed.warnings.push_back(fmt::format("slot {}: value {} outside [0,1]", k, v));
    }
  }
  if (found.size() < n_tests)
    parsed.warnings.push_back(fmt::format("expected {} scores, found {}", n_tests, found.size()));
  return parsed;
}

std::optional<bool> parse_binary_output(std::string_view raw) {
  std::string folded = lower(raw);
  std::string_view text = folded;
  if (auto pos = folded.rfind("output:"); pos != std::string::npos) text = text.substr(pos + 7);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    if (word == "yes") return true;
    if (word == "no") return false;
    i = j;
  }
  return std::nullopt;
}

}  // namespace hoir
