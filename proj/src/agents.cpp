#include "hoir/agents.hpp"

#include <cstdlib>
#include <map>
#include <span>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hoir/ingest.hpp"
#include "hoir/parallel.hpp"
#include "hoir/prompt.hpp"

namespace hoir {

std::vector<int> select_keyframes(const std::vector<int>& frame_indices, int interval) {
  if (interval < 1) throw PreconditionError(fmt::format("keyframe interval {} is below 1", interval));
  std::vector<int> out;
  for (std::size_t i = 0; i < frame_indices.size(); i += static_cast<std::size_t>(interval))
    out.push_back(frame_indices[i]);
  return out;
}

std::vector<int> frame_indices(const VideoPredictionSet& set) {
  std::vector<int> out;
  for (const auto& frame : set.frames) out.push_back(frame.frame_index);
  return out;
}

std::vector<Candidate> keyframe_candidates(const VideoPredictionSet& set,
                                           const std::vector<int>& keyframes, double floor) {
  std::vector<Candidate> out;
  for (int k : keyframes) {
    auto pos = set.frame_position(k);
    if (!pos) throw PreconditionError(fmt::format("keyframe {} is not in the set", k));
    const auto& frame = set.frames[*pos];
    for (std::size_t p = 0; p < frame.pairs.size(); ++p)
      for (std::size_t r = 0; r < frame.pairs[p].scores.size(); ++r)
        if (frame.pairs[p].scores[r] >= floor) out.push_back({*pos, {k, p, r}});
  }
  return out;
}

namespace {

std::size_t argmax(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

// Sends `items` in batches and returns one optional score per item.
template <class Item, class Render>
std::vector<std::optional<double>> score_batched(const ModelClient& client, const std::vector<Item>& items,
                                                 Render render, std::string_view agent,
                                                 const AgentOptions& options, AgentRunStats& stats) {
  std::vector<std::optional<double>> values(items.size());
  if (items.empty()) return values;
  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  const std::size_t n_batches = (items.size() + batch - 1) / batch;
  std::vector<AgentRunStats> per_batch(n_batches);

  parallel_for(n_batches, options.parallelism, [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t count = std::min(batch, items.size() - begin);
    std::span<const Item> slice(items.data() + begin, count);
    auto& local = per_batch[b];
    ++local.prompts;
    std::string answer;
    try {
      answer = client.ask(render(slice).render()).text;
    } catch (const ProviderError& e) {
      ++local.failed_prompts;
      local.parse_failures += count;
      spdlog::warn("{} agent, provider {}: batch {} failed: {}", agent, client.id(), b, e.what());
      return;
    }
    auto parsed = parse_score_output(answer, count);
    for (const auto& w : parsed.warnings)
      spdlog::warn("{} agent, provider {}: batch {}: {}", agent, client.id(), b, w);
    local.parse_failures += parsed.failures();
    for (std::size_t i = 0; i < count; ++i) values[begin + i] = parsed.values[i];
  });
  for (const auto& local : per_batch) stats += local;
  return values;
}

// Distinct texts in first-seen order plus the text index of every entry.
struct Interned {
  std::vector<std::string> texts;
  std::vector<std::size_t> index_of;

  void add(std::string text) {
    auto [it, inserted] = lookup.emplace(text, texts.size());
    if (inserted) texts.push_back(std::move(text));
    index_of.push_back(it->second);
  }

  std::map<std::string, std::size_t> lookup;
};

}  // namespace

AgentRunStats& AgentRunStats::operator+=(const AgentRunStats& other) {
  prompts += other.prompts;
  failed_prompts += other.failed_prompts;
  parse_failures += other.parse_failures;
  requested += other.requested;
  scored += other.scored;
  return *this;
}

std::vector<Transition> detect_transitions(const VideoPredictionSet& set) {
  if (!set.tracked()) throw TrackingUnavailableError();
  std::vector<Transition> out;
  for (std::size_t f = 1; f < set.frames.size(); ++f) {
    std::map<PairId, std::size_t> previous;
    for (std::size_t p = 0; p < set.frames[f - 1].pairs.size(); ++p)
      previous.emplace(*set.frames[f - 1].pairs[p].pair_id, p);
    const auto& frame = set.frames[f];
    for (std::size_t p = 0; p < frame.pairs.size(); ++p) {
      const auto& pair = frame.pairs[p];
      auto it = previous.find(*pair.pair_id);
      if (it == previous.end()) continue;
      std::size_t before = argmax(set.frames[f - 1].pairs[it->second].scores);
      std::size_t after = argmax(pair.scores);
      if (before != after) out.push_back({frame.frame_index, f, p, *pair.pair_id, before, after});
    }
  }
  return out;
}

AgentRun run_common_sense(const ModelClient& client, const VideoPredictionSet& set,
                          const std::vector<Candidate>& candidates, const AgentOptions& options) {
  AgentRun run;
  Interned interned;
  for (const auto& c : candidates)
    interned.add(triplet_to_text(set.frames[c.frame_pos].pairs[c.key.pair], c.key.relation, set.vocabulary));

  auto values = score_batched(
      client, interned.texts, [](std::span<const std::string> tests) { return render_common_sense(tests); },
      "common-sense", options, run.stats);
  run.stats.requested = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (auto v = values[interned.index_of[i]]) {
      run.table.set(candidates[i].key, Agent::common_sense, *v);
      ++run.stats.scored;
    }
  }
  return run;
}

std::set<std::size_t> classify_spatial_awareness(const ModelClient& client,
                                                 const RelationVocabulary& vocab,
                                                 const std::set<std::size_t>& relations,
                                                 AgentRunStats& stats, std::size_t parallelism) {
  std::vector<std::size_t> order(relations.begin(), relations.end());
  std::vector<char> aware(order.size(), 0);
  std::vector<AgentRunStats> local(order.size());
  parallel_for(order.size(), parallelism, [&](std::size_t i) {
    std::vector<std::string> test{vocab.name(order[i])};
    ++local[i].prompts;
    try {
      auto answer = parse_binary_output(client.ask(render_spatial_awareness(test).render()).text);
      if (!answer) {
        ++local[i].parse_failures;
        spdlog::warn("spatial agent, provider {}: no yes/no answer for \"{}\"; treating it as not spatial-aware",
                     client.id(), test[0]);
      }
      aware[i] = answer.value_or(false);
    } catch (const ProviderError& e) {
      ++local[i].failed_prompts;
      spdlog::warn("spatial agent, provider {}: awareness query for \"{}\" failed: {}", client.id(), test[0],
                   e.what());
    }
  });
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    stats += local[i];
    if (aware[i]) out.insert(order[i]);
  }
  return out;
}

AgentRun run_spatial(const ModelClient& client, const VideoPredictionSet& set,
                     const std::vector<Candidate>& candidates, const AgentOptions& options) {
  AgentRun run;
  std::set<std::size_t> relations;
  for (const auto& c : candidates) relations.insert(c.key.relation);
  auto aware = classify_spatial_awareness(client, set.vocabulary, relations, run.stats, options.parallelism);

  std::vector<const Candidate*> scored_candidates;
  std::vector<SpatialQuery> queries;
  Interned interned;
  for (const auto& c : candidates) {
    if (!aware.contains(c.key.relation)) continue;
    const auto& pair = set.frames[c.frame_pos].pairs[c.key.pair];
    SpatialQuery query{triplet_to_text(pair, c.key.relation, set.vocabulary), pair.human_box, pair.object_box};
    std::size_t before = interned.texts.size();
    interned.add(spatial_test_input(query));
    if (interned.texts.size() > before) queries.push_back(std::move(query));
    scored_candidates.push_back(&c);
  }

  auto values = score_batched(
      client, queries, [](std::span<const SpatialQuery> q) { return render_spatial_scoring(q); }, "spatial",
      options, run.stats);
  run.stats.requested = scored_candidates.size();
  for (std::size_t i = 0; i < scored_candidates.size(); ++i) {
    if (auto v = values[interned.index_of[i]]) {
      run.table.set(scored_candidates[i]->key, Agent::spatial, *v);
      ++run.stats.scored;
    }
  }
  return run;
}

AgentRun run_temporal(const ModelClient& client, const VideoPredictionSet& set,
                      const std::vector<Transition>& transitions, const AgentOptions& options) {
  AgentRun run;
  std::vector<TransitionText> items;
  Interned interned;
  for (const auto& t : transitions) {
    const auto& pair = set.frames[t.frame_pos].pairs[t.pair];
    TransitionText text{triplet_to_text(pair, t.old_relation, set.vocabulary),
                        triplet_to_text(pair, t.new_relation, set.vocabulary)};
    std::size_t before = interned.texts.size();
    interned.add(temporal_test_input(text));
    if (interned.texts.size() > before) items.push_back(std::move(text));
  }

  auto values = score_batched(
      client, items, [](std::span<const TransitionText> t) { return render_temporal(t); }, "temporal", options,
      run.stats);
  run.stats.requested = transitions.size();
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (auto v = values[interned.index_of[i]]) {
      const auto& t = transitions[i];
      run.table.set({t.frame_index, t.pair, t.new_relation}, Agent::temporal, *v);
      ++run.stats.scored;
    }
  }
  return run;
}

namespace {

// Nearest of `sources` to `t`; the earlier one wins a tie.
std::optional<int> nearest(const std::vector<int>& sources, int t) {
  std::optional<int> best;
  for (int k : sources) {
    if (!best || std::abs(k - t) < std::abs(*best - t) || (std::abs(k - t) == std::abs(*best - t) && k < *best))
      best = k;
  }
  return best;
}

}  // namespace

AgentScoreTable propagate_scores(const AgentScoreTable& table, const VideoPredictionSet& set,
                                 const std::vector<int>& keyframes) {
  const std::set<int> is_key(keyframes.begin(), keyframes.end());
  AgentScoreTable out;
  for (const auto& [key, scores] : table) {
    if (!is_key.contains(key.frame_index)) continue;
    for (Agent agent : kAllAgents)
      if (scores[agent]) out.set(key, agent, *scores[agent]);
  }

  const std::size_t n = set.vocabulary.size();
  if (set.tracked()) {
    std::map<PairId, std::vector<std::pair<int, std::size_t>>> holders;  // pair id -> (keyframe, slot)
    for (int k : keyframes) {
      const auto& frame = set.frames[*set.frame_position(k)];
      for (std::size_t p = 0; p < frame.pairs.size(); ++p) holders[*frame.pairs[p].pair_id].emplace_back(k, p);
    }
    for (const auto& frame : set.frames) {
      if (is_key.contains(frame.frame_index)) continue;
      for (std::size_t p = 0; p < frame.pairs.size(); ++p) {
        auto it = holders.find(*frame.pairs[p].pair_id);
        if (it == holders.end()) continue;
        std::vector<int> sources;
        for (const auto& [k, slot] : it->second) sources.push_back(k);
        int src = *nearest(sources, frame.frame_index);
        std::size_t src_slot = 0;
        for (const auto& [k, slot] : it->second)
          if (k == src) src_slot = slot;
        for (std::size_t r = 0; r < n; ++r) {
          const AgentScores* found = table.find({src, src_slot, r});
          if (!found) continue;
          for (Agent agent : kAllAgents)
            if ((*found)[agent]) out.set({frame.frame_index, p, r}, agent, *(*found)[agent]);
        }
      }
    }
    return out;
  }

  // Untracked: common-sense scores depend on the triplet text alone.
  std::map<std::string, std::vector<std::pair<int, double>>> by_text;  // text -> (keyframe, s_cs)
  for (int k : keyframes) {
    const auto& frame = set.frames[*set.frame_position(k)];
    for (std::size_t p = 0; p < frame.pairs.size(); ++p)
      for (std::size_t r = 0; r < n; ++r)
        if (auto v = table.get({k, p, r}, Agent::common_sense)) {
          auto& list = by_text[triplet_to_text(frame.pairs[p], r, set.vocabulary)];
          if (list.empty() || list.back().first != k) list.emplace_back(k, *v);
        }
  }
  for (const auto& frame : set.frames) {
    if (is_key.contains(frame.frame_index)) continue;
    for (std::size_t p = 0; p < frame.pairs.size(); ++p) {
      for (std::size_t r = 0; r < n; ++r) {
        auto it = by_text.find(triplet_to_text(frame.pairs[p], r, set.vocabulary));
        if (it == by_text.end()) continue;
        std::vector<int> sources;
        for (const auto& [k, v] : it->second) sources.push_back(k);
        int src = *nearest(sources, frame.frame_index);
        for (const auto& [k, v] : it->second)
          if (k == src) out.set({frame.frame_index, p, r}, Agent::common_sense, v);
      }
    }
  }
  return out;
}

AgentScoreTable average_providers(const std::vector<AgentScoreTable>& tables) {
  std::map<std::pair<ScoreKey, int>, std::pair<double, int>> sums;
  for (const auto& table : tables)
    for (const auto& [key, scores] : table)
      for (Agent agent : kAllAgents)
        if (scores[agent]) {
          auto& [sum, count] = sums[{key, static_cast<int>(agent)}];
          sum += *scores[agent];
          ++count;
        }
  AgentScoreTable out;
  for (const auto& [slot, acc] : sums)
    out.set(slot.first, static_cast<Agent>(slot.second), std::min(1.0, acc.first / acc.second));
  return out;
}

}  // namespace hoir
