#include "hoir/pipeline.hpp"

#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hoir/fusion.hpp"
#include "hoir/parallel.hpp"

namespace hoir {

namespace {

std::vector<ModelClient> build_clients(const RefinementConfig& config) {
  std::shared_ptr<const ResponseCache> cache;
  if (config.cache_dir) cache = std::make_shared<ResponseCache>(*config.cache_dir);
  std::vector<ModelClient> clients;
  for (const auto& spec : config.providers)
    clients.emplace_back(Provider::create(spec), cache, config.temperature, config.max_tokens);
  return clients;
}

AgentScoreTable mask(const AgentScoreTable& table, const ComponentToggles& toggles) {
  AgentScoreTable out;
  for (const auto& [key, scores] : table)
    for (Agent agent : {Agent::common_sense, Agent::spatial, Agent::temporal})
      if (toggles.enabled(agent) && scores[agent]) out.set(key, agent, *scores[agent]);
  return out;
}

}  // namespace

Refiner::Refiner(RefinementConfig config) : config_(std::move(config)), clients_(build_clients(config_)) {}

Refiner::Refiner(RefinementConfig config, std::vector<ModelClient> clients)
    : config_(std::move(config)), clients_(std::move(clients)) {
  config_.validate();
  if (clients_.size() != config_.providers.size())
    throw PreconditionError("one client per configured provider is required");
}

StageOne Refiner::stage_one(const VideoPredictionSet& set) const {
  StageOne stage;
  stage.keyframes = select_keyframes(frame_indices(set), config_.keyframe_interval);
  stage.candidates = keyframe_candidates(set, stage.keyframes, config_.candidate_floor);
  stage.tracked = set.tracked();
  if (stage.tracked) {
    const std::set<int> keys(stage.keyframes.begin(), stage.keyframes.end());
    for (auto& t : detect_transitions(set))
      if (keys.contains(t.frame_index)) stage.transitions.push_back(t);
  } else {
    spdlog::warn("video {} has no pair tracking; the temporal agent is skipped", set.video_id);
  }

  const std::size_t n = clients_.size();
  const std::size_t outer = std::min(n, config_.parallelism);
  AgentOptions options{config_.candidate_floor, config_.batch_size,
                       std::max<std::size_t>(1, config_.parallelism / std::max<std::size_t>(outer, 1))};
  stage.provider_tables.resize(n);
  stage.stats.resize(n);
  parallel_for(n, outer, [&](std::size_t i) {
    const auto& client = clients_[i];
    auto& stats = stage.stats[i];
    stats.id = client.id();
    auto cs = run_common_sense(client, set, stage.candidates, options);
    auto sp = run_spatial(client, set, stage.candidates, options);
    AgentRun tp;
    if (stage.tracked) tp = run_temporal(client, set, stage.transitions, options);
    stats.common_sense = cs.stats;
    stats.spatial = sp.stats;
    stats.temporal = tp.stats;
    auto& table = stage.provider_tables[i];
    table.merge(cs.table);
    table.merge(sp.table);
    table.merge(tp.table);
  });
  return stage;
}

RefinementResult Refiner::finish(const VideoPredictionSet& set, const StageOne& stage,
                                 const ComponentToggles& toggles) const {
  RefinementResult result;
  std::vector<AgentScoreTable> masked;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < stage.provider_tables.size(); ++i) {
    masked.push_back(mask(stage.provider_tables[i], toggles));
    ids.push_back(clients_[i].id());
  }
  result.keyframe_scores = average_providers(masked);

  if (toggles.debate && config_.debate_mode != DebateMode::off) {
    auto chosen = select_debate_candidates(set, stage.candidates, masked, ids, config_.weights,
                                           config_.debate_mode, config_.disagreement_delta);
    std::vector<Participant> debaters;
    const Participant* judge = nullptr;
    for (const auto& client : clients_)
      debaters.push_back({client.id(), [client](const std::string& prompt) { return client.ask(prompt).text; }});
    for (const auto& d : debaters)
      if (d.id == config_.judge()) judge = &d;

    result.transcripts.resize(chosen.size());
    parallel_for(chosen.size(), config_.parallelism,
                 [&](std::size_t i) { result.transcripts[i] = run_debate(chosen[i].question, debaters, *judge); });
    result.debate.requested = chosen.size();
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const auto& t = result.transcripts[i];
      if (config_.transcript_dir) write_transcript(t, *config_.transcript_dir);
      if (t.judge_score) {
        result.keyframe_scores.set(chosen[i].key, Agent::debate, *t.judge_score);
        ++result.debate.scored;
      }
    }
  }

  for (const auto& c : stage.candidates) {
    const AgentScores* s = result.keyframe_scores.find(c.key);
    if (toggles.common_sense) {
      ++result.common_sense.requested;
      result.common_sense.scored += s && s->common_sense;
    }
    if (toggles.spatial) {
      ++result.spatial.requested;
      result.spatial.scored += s && s->spatial;
    }
  }
  if (toggles.temporal)
    for (const auto& t : stage.transitions) {
      ++result.temporal.requested;
      result.temporal.scored += result.keyframe_scores.get({t.frame_index, t.pair, t.new_relation}, Agent::temporal)
                                    .has_value();
    }

  result.scores = propagate_scores(result.keyframe_scores, set, stage.keyframes);
  result.fused = fuse_all(set, result.scores, config_.weights, toggles);
  return result;
}

std::vector<AblationRow> Refiner::ablate(const VideoPredictionSet& set, const GroundTruthSet& gt,
                                         const std::vector<int>& ks) const {
  std::vector<AblationRow> rows;
  const double threshold = config_.weights.threshold;
  rows.push_back({true, ComponentToggles::none(), recall_at_k_dataset(set, base_scores(set), gt, threshold, ks)});
  auto stage = stage_one(set);
  for (const auto& toggles : all_toggle_combinations()) {
    auto result = finish(set, stage, toggles);
    rows.push_back({false, toggles, recall_at_k_dataset(set, result.fused, gt, threshold, ks)});
  }
  return rows;
}

std::size_t Refiner::provider_calls() const {
  std::size_t calls = 0;
  for (const auto& client : clients_) calls += client.provider().stats().calls;
  return calls;
}

bool Refiner::exhausted(const StageOne& stage) {
  std::size_t prompts = 0, failed = 0;
  for (const auto& s : stage.stats)
    for (const auto* a : {&s.common_sense, &s.spatial, &s.temporal}) {
      prompts += a->prompts;
      failed += a->failed_prompts;
    }
  return prompts > 0 && failed == prompts;
}

std::string Refiner::summary(const StageOne& stage, const RefinementResult& result) const {
  std::string out = fmt::format("keyframes {}, candidates {}, transitions {}, debates {}\n", stage.keyframes.size(),
                                stage.candidates.size(), stage.transitions.size(), result.transcripts.size());
  out += fmt::format("{:<12} {:>8} {:>10} {:>12} {:>9} {:>14}\n", "provider", "prompts", "cache_hits", "remote_calls",
                     "failures", "parse_failures");
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    const auto& c = clients_[i];
    const auto pstats = c.provider().stats();
    std::size_t parse_failures = 0;
    if (i < stage.stats.size())
      for (const auto* a : {&stage.stats[i].common_sense, &stage.stats[i].spatial, &stage.stats[i].temporal})
        parse_failures += a->parse_failures;
    out += fmt::format("{:<12} {:>8} {:>10} {:>12} {:>9} {:>14}\n", c.id(), c.requests(), c.cache_hits(),
                       pstats.calls, pstats.failures, parse_failures);
  }
  std::size_t requests = 0, hits = 0;
  for (const auto& c : clients_) {
    requests += c.requests();
    hits += c.cache_hits();
  }
  out += fmt::format("cache hit rate {:.2f}%\n", requests ? 100.0 * hits / requests : 0.0);
  auto line = [&](std::string_view name, const Coverage& c) {
    out += fmt::format("coverage {:<13} {:>4}/{:<4} {:6.2f}%\n", name, c.scored, c.requested, 100.0 * c.fraction());
  };
  line("common_sense", result.common_sense);
  line("spatial", result.spatial);
  line("temporal", result.temporal);
  line("debate", result.debate);
  return out;
}

}  // namespace hoir
