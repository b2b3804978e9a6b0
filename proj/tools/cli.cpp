#include "cli.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "hoir/cliploss.hpp"
#include "hoir/config.hpp"
#include "hoir/eval.hpp"
#include "hoir/fusion.hpp"
#include "hoir/ingest.hpp"
#include "hoir/pipeline.hpp"

namespace hoir::cli {

namespace {

struct Options {
  std::string config, predictions, gt, out, vocab, cache_dir, transcript_dir, debate_mode, summary;
  std::string batch, metric = "neg_cosine", activation = "tanh";
  std::optional<double> threshold;
  std::optional<int> interval;
  std::vector<int> ks = kDefaultKs;
  double h = 1e-5;
  std::uint64_t seed = 0;
  std::size_t k = 4, feature_dim = 8, embed_dim = 8, hidden = 16;
};

RefinementConfig load_config(const Options& o) {
  auto config = RefinementConfig::load(o.config);
  if (o.interval) config.keyframe_interval = *o.interval;
  if (o.threshold) config.weights.threshold = *o.threshold;
  if (!o.debate_mode.empty()) config.debate_mode = parse_debate_mode(o.debate_mode);
  if (!o.cache_dir.empty()) config.cache_dir = o.cache_dir;
  if (!o.transcript_dir.empty()) config.transcript_dir = o.transcript_dir;
  config.validate();
  return config;
}

RelationVocabulary load_vocab(const Options& o, const RefinementConfig* config) {
  if (!o.vocab.empty()) return load_vocabulary(o.vocab);
  if (config && config->vocabulary) return load_vocabulary(*config->vocabulary);
  throw ValidationError("no vocabulary: pass --vocab or set \"vocabulary\" in the config");
}

int cmd_refine(const Options& o, std::ostream& out) {
  auto config = load_config(o);
  auto vocab = load_vocab(o, &config);
  auto set = load_predictions(o.predictions, vocab);
  Refiner refiner(config);
  auto stage = refiner.stage_one(set);
  if (Refiner::exhausted(stage)) {
    spdlog::error("every provider request failed; nothing was written");
    return kProviderExhausted;
  }
  auto result = refiner.finish(set, stage);
  write_predictions(set, result.fused, o.out);
  auto summary = refiner.summary(stage, result);
  out << summary;
  if (!o.summary.empty()) write_text_file(o.summary, summary);
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  std::optional<RefinementConfig> config;
  if (!o.config.empty()) config = load_config(o);
  auto vocab = load_vocab(o, config ? &*config : nullptr);
  auto set = load_predictions(o.predictions, vocab);
  auto gt = load_ground_truth(o.gt, set);
  double threshold = o.threshold.value_or(config ? config->weights.threshold : FusionWeights{}.threshold);
  if (!(threshold > 0 && threshold < 1)) throw ValidationError("--threshold must lie in (0,1)");
  AblationRow row{set.scale == ScoreScale::probability, ComponentToggles{},
                  recall_at_k_dataset(set, base_scores(set), gt, threshold, o.ks)};
  std::vector<AblationRow> rows{row};
  out << format_recall_table(rows, o.ks);
  std::string report = o.out.empty() ? o.predictions + ".recall.jsonl" : o.out;
  write_text_file(report, ablation_jsonl(rows, o.ks));
  return kOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  auto config = load_config(o);
  auto vocab = load_vocab(o, &config);
  auto set = load_predictions(o.predictions, vocab);
  auto gt = load_ground_truth(o.gt, set);
  Refiner refiner(config);
  auto rows = refiner.ablate(set, gt, o.ks);
  auto table = format_recall_table(rows, o.ks);
  out << table;
  if (!o.out.empty()) {
    write_text_file(o.out + ".jsonl", ablation_jsonl(rows, o.ks));
    write_text_file(o.out + ".txt", table);
  }
  out << fmt::format("provider calls {}\n", refiner.provider_calls());
  return kOk;
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ValidationError(fmt::format("unknown activation \"{}\"", name));
}

int cmd_gradcheck(const Options& o, std::ostream& out, bool metric_given) {
  if (!(o.h > 0)) throw ValidationError("--h must be positive");
  auto batch = EmbeddingBatch::load(o.batch);
  Metric metric = metric_given ? parse_metric(o.metric) : batch.metric;
  double error = 0;
  if (batch.pre_fusion()) {
    auto params = MlpParams::random({3 * *batch.feature_dim, o.hidden, batch.embed_dim},
                                    {parse_activation(o.activation), Activation::identity}, o.seed);
    error = finite_diff_check(params, batch, metric, o.h);
  } else {
    error = finite_diff_check_features(batch, metric, o.h);
  }
  out << fmt::format("metric {} h {} max relative error {:.3e}\n", metric_name(metric), o.h, error);
  return error <= kGradTolerance ? kOk : kGradientMismatch;
}

int cmd_make_batch(const Options& o, std::ostream& out) {
  auto batch = random_embedding_batch(o.k, o.feature_dim, o.embed_dim, parse_metric(o.metric), o.seed);
  write_text_file(o.out, batch.serialize());
  out << fmt::format("wrote {}x{} batch to {}\n", o.k, o.k, o.out);
  return kOk;
}

int cmd_clip_text(const Options& o, std::ostream& out) {
  auto vocab = load_vocab(o, nullptr);
  auto set = load_predictions(o.predictions, vocab);
  std::set<std::string> lines;
  for (const auto& frame : set.frames)
    for (const auto& pair : frame.pairs)
      for (std::size_t r = 0; r < vocab.size(); ++r) lines.insert(clip_text_template(vocab.name(r), pair.object_class));
  for (const auto& line : lines) out << line << '\n';
  return kOk;
}

// Routes library log lines to `err` while a command runs.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("hoir", sink);
    logger->set_pattern("%l: %v");
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  LogScope log(err);
  Options o;
  CLI::App app{"Multi-model refinement of video human-object interaction predictions", "hoir"};
  app.require_subcommand(1);

  auto* refine = app.add_subcommand("refine", "Score, debate, fuse and write refined predictions");
  refine->add_option("--config", o.config, "Refinement config (JSON)")->required();
  refine->add_option("--predictions", o.predictions, "Base predictions (JSON lines)")->required();
  refine->add_option("--out", o.out, "Refined predictions output")->required();
  refine->add_option("--summary", o.summary, "Also write the run summary here");

  auto* eval = app.add_subcommand("eval", "Recall@K of a prediction file under the Semi-Constraint rule");
  eval->add_option("--predictions", o.predictions, "Predictions (base or refined)")->required();
  eval->add_option("--gt", o.gt, "Ground truth (JSON lines)")->required();
  eval->add_option("--out", o.out, "Report file (default: <predictions>.recall.jsonl)");

  auto* ablate = app.add_subcommand("ablate", "Recall for every combination of components");
  ablate->add_option("--config", o.config, "Refinement config (JSON)")->required();
  ablate->add_option("--predictions", o.predictions, "Base predictions")->required();
  ablate->add_option("--gt", o.gt, "Ground truth")->required();
  ablate->add_option("--out", o.out, "Report prefix; writes PREFIX.jsonl and PREFIX.txt");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the embedding-loss gradients");
  grad->add_option("--batch", o.batch, "Embedding batch file")->required();
  auto* metric_opt = grad->add_option("--metric", o.metric, "l1 or neg_cosine (default: the batch header)");
  grad->set_help_flag("--help", "Print this help message and exit");
  grad->add_option("--h", o.h, "Central-difference step")->capture_default_str();
  grad->add_option("--hidden", o.hidden, "Hidden width of the probe MLP")->capture_default_str();
  grad->add_option("--activation", o.activation, "Hidden activation: tanh, relu or identity")->capture_default_str();

  auto* make = app.add_subcommand("make-batch", "Write a seeded random embedding batch");
  make->add_option("--out", o.out, "Output file")->required();
  make->add_option("--k", o.k, "Grid size K")->capture_default_str();
  make->add_option("--df", o.feature_dim, "Per-entity feature size D_f")->capture_default_str();
  make->add_option("--de", o.embed_dim, "Embedding size D_e")->capture_default_str();
  make->add_option("--metric", o.metric, "Metric written to the header")->capture_default_str();

  auto* clip = app.add_subcommand("clip-text", "Print the text template for every relation and object class");
  clip->add_option("--predictions", o.predictions, "Predictions file")->required();

  for (auto* sub : {refine, eval, ablate}) {
    sub->add_option("--threshold", o.threshold, "Semi-Constraint threshold");
    sub->add_option("--vocab", o.vocab, "Relation vocabulary (default: from the config)");
  }
  for (auto* sub : {refine, ablate}) {
    sub->add_option("--interval", o.interval, "Keyframe interval");
    sub->add_option("--debate-mode", o.debate_mode, "disagreement, always or off");
    sub->add_option("--cache-dir", o.cache_dir, "Response cache directory");
    sub->add_option("--transcripts", o.transcript_dir, "Debate transcript directory");
  }
  eval->add_option("--config", o.config, "Config supplying the vocabulary and threshold");
  for (auto* sub : {refine, eval, ablate}) sub->add_option("--k", o.ks, "K values")->delimiter(',');
  clip->add_option("--vocab", o.vocab, "Relation vocabulary")->required();
  for (auto* sub : {grad, make}) sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
  for (int k : o.ks)
    if (k < 1) {
      err << "error: --k values must be >= 1\n";
      return kInvalid;
    }

  try {
    if (refine->parsed()) return cmd_refine(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (ablate->parsed()) return cmd_ablate(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out, metric_opt->count() > 0);
    if (make->parsed()) return cmd_make_batch(o, out);
    if (clip->parsed()) return cmd_clip_text(o, out);
  } catch (const ProviderError& e) {
    err << "error: " << e.what() << '\n';
    return kProviderExhausted;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}

}  // namespace hoir::cli
