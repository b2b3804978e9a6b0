#include "hoir/debate.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hoir/fusion.hpp"
#include "hoir/ingest.hpp"
#include "hoir/provider.hpp"

namespace hoir {

DebateMode parse_debate_mode(std::string_view text) {
  if (text == "disagreement") return DebateMode::disagreement;
  if (text == "always") return DebateMode::always;
  if (text == "off") return DebateMode::off;
  throw ValidationError(fmt::format("unknown debate mode \"{}\" (expected disagreement, always or off)", text));
}

std::string_view debate_mode_name(DebateMode mode) {
  switch (mode) {
    case DebateMode::disagreement: return "disagreement";
    case DebateMode::always: return "always";
    case DebateMode::off: return "off";
  }
  return "?";
}

bool should_debate(std::span<const double> provider_fused, DebateMode mode, double delta) {
  switch (mode) {
    case DebateMode::off: return false;
    case DebateMode::always: return true;
    case DebateMode::disagreement: {
      if (provider_fused.empty()) return false;
      auto [lo, hi] = std::minmax_element(provider_fused.begin(), provider_fused.end());
      return *hi - *lo > delta;
    }
  }
  return false;
}

namespace {

std::string score_or_dash(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }

}  // namespace

std::string debate_question(const SpatialQuery& triplet, std::span<const ProviderView> views) {
  std::string out = fmt::format("Triplet: {}\nStage-one scores:", spatial_test_input(triplet));
  for (const auto& v : views)
    out += fmt::format("\n{}: common sense {}, spatial {}, temporal {}, fused {:.3f}", v.provider,
                       score_or_dash(v.scores.common_sense), score_or_dash(v.scores.spatial),
                       score_or_dash(v.scores.temporal), v.fused);
  out += "\nIs this triplet rational? Give a final score between 0 and 1 in the form \"Output: score\".";
  return out;
}

std::vector<DebateCandidate> select_debate_candidates(const VideoPredictionSet& set,
                                                      const std::vector<Candidate>& candidates,
                                                      const std::vector<AgentScoreTable>& provider_tables,
                                                      const std::vector<std::string>& provider_ids,
                                                      const FusionWeights& weights, DebateMode mode,
                                                      double delta) {
  if (provider_tables.size() != provider_ids.size())
    throw PreconditionError("one stage-one table per provider is required");
  std::vector<DebateCandidate> out;
  if (mode == DebateMode::off) return out;
  for (const auto& c : candidates) {
    const auto& pair = set.frames[c.frame_pos].pairs[c.key.pair];
    const double base = pair.scores[c.key.relation];
    std::vector<ProviderView> views;
    std::vector<double> fused;
    for (std::size_t i = 0; i < provider_tables.size(); ++i) {
      AgentScores scores;
      if (const AgentScores* found = provider_tables[i].find(c.key)) scores = *found;
      scores.debate.reset();
      views.push_back({provider_ids[i], scores, fuse_scores(base, scores, weights)});
      fused.push_back(views.back().fused);
    }
    if (!should_debate(fused, mode, delta)) continue;
    SpatialQuery query{triplet_to_text(pair, c.key.relation, set.vocabulary), pair.human_box, pair.object_box};
    out.push_back({c.key, std::move(fused), debate_question(query, views)});
  }
  return out;
}

namespace {

HistoryEntry turn(const Participant& who, const std::string& prompt) {
  try {
    return {who.id, who.answer(prompt), false};
  } catch (const Error& e) {
    spdlog::warn("debater {} failed: {}", who.id, e.what());
    return {who.id, "", true};
  }
}

}  // namespace

DebateTranscript run_debate(std::string question, std::span<const Participant> debaters,
                            const Participant& judge) {
  if (debaters.empty()) throw PreconditionError("a debate needs at least one debater");
  DebateTranscript t;
  t.question = std::move(question);
  t.entries.push_back({"question", t.question, false});
  auto history = [&] { return std::span<const HistoryEntry>(t.entries).subspan(1); };

  for (std::size_t i = 0; i < debaters.size(); ++i) {
    t.entries.push_back(turn(debaters[i], render_debate_turn(DebateRole::debater, t.question, {})));
    for (std::size_t j = 0; j < debaters.size(); ++j) {
      if (j == i) continue;
      t.entries.push_back(turn(debaters[j], render_debate_turn(DebateRole::debater, t.question, history())));
    }
  }

  t.judge_id = judge.id;
  try {
    t.judge_answer = judge.answer(render_debate_turn(DebateRole::judge, t.question, history()));
    auto parsed = parse_score_output(t.judge_answer, 1);
    t.judge_score = parsed.values[0];
    for (const auto& w : parsed.warnings) spdlog::warn("judge {}: {}", judge.id, w);
  } catch (const Error& e) {
    spdlog::warn("judge {} failed: {}", judge.id, e.what());
    t.judge_failed = true;
  }
  return t;
}

std::filesystem::path write_transcript(const DebateTranscript& transcript, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::string body;
  for (const auto& e : transcript.entries)
    body += nlohmann::json{{"speaker", e.speaker}, {"text", e.text}, {"failed", e.failed}}.dump() + "\n";
  nlohmann::json judge{{"speaker", "judge:" + transcript.judge_id},
                       {"text", transcript.judge_answer},
                       {"failed", transcript.judge_failed}};
  judge["score"] = transcript.judge_score ? nlohmann::json(*transcript.judge_score) : nlohmann::json(nullptr);
  body += judge.dump() + "\n";
  auto path = dir / (sha256_hex(transcript.question) + ".jsonl");
  write_text_file(path, body);
  return path;
}

}  // namespace hoir
