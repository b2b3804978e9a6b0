#include "hoir/cliploss.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "hoir/errors.hpp"
#include "hoir/ingest.hpp"

namespace hoir {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t MlpParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

double& MlpParams::parameter(std::size_t index) {
  for (auto& l : layers) {
    auto w = static_cast<std::size_t>(l.weight.size());
    if (index < w) return l.weight.data()[index];
    index -= w;
    auto b = static_cast<std::size_t>(l.bias.size());
    if (index < b) return l.bias.data()[index];
    index -= b;
  }
  throw PreconditionError("parameter index out of range");
}

double MlpParams::parameter(std::size_t index) const { return const_cast<MlpParams&>(*this).parameter(index); }

void MlpParams::validate() const {
  if (layers.empty()) throw DimensionError("MLP has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weight.rows())
      throw DimensionError(fmt::format("layer {}: bias size {} for {} outputs", i, l.bias.size(), l.weight.rows()));
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
      throw DimensionError(fmt::format("layer {} expects {} inputs but layer {} gives {}", i, l.weight.cols(), i - 1,
                                       layers[i - 1].weight.rows()));
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw ValidationError(fmt::format("layer {} has non-finite entries", i));
  }
}

MlpParams MlpParams::random(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
                            std::uint64_t seed) {
  if (dims.size() < 2 || activations.size() + 1 != dims.size())
    throw DimensionError("need at least two dims and one activation per layer");
  std::mt19937_64 rng(seed);
  MlpParams params;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dims[i])));
    MlpLayer layer{MatrixXd(dims[i + 1], dims[i]), VectorXd::Zero(dims[i + 1]), activations[i]};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = normal(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

MlpParams MlpParams::default_shape(std::uint64_t seed) {
  return random({3 * 64, 128, 64}, {Activation::relu, Activation::identity}, seed);
}

MlpGradients MlpGradients::zeros_like(const MlpParams& params) {
  MlpGradients g;
  for (const auto& l : params.layers) {
    g.weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(VectorXd::Zero(l.bias.size()));
  }
  return g;
}

double MlpGradients::parameter(std::size_t index) const {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    auto w = static_cast<std::size_t>(weight[i].size());
    if (index < w) return weight[i].data()[index];
    index -= w;
    auto b = static_cast<std::size_t>(bias[i].size());
    if (index < b) return bias[i].data()[index];
    index -= b;
  }
  throw PreconditionError("gradient index out of range");
}

namespace {

VectorXd activate(Activation a, const VectorXd& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

VectorXd activation_slope(Activation a, const VectorXd& z) {
  switch (a) {
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::identity: return VectorXd::Ones(z.size());
  }
  return VectorXd::Ones(z.size());
}

}  // namespace

VectorXd mlp_forward(const MlpParams& params, const VectorXd& input, MlpCache* cache) {
  if (params.layers.empty()) throw DimensionError("MLP has no layers");
  if (static_cast<std::size_t>(input.size()) != params.input_dim())
    throw DimensionError(fmt::format("MLP expects {} inputs, got {}", params.input_dim(), input.size()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  VectorXd x = input;
  for (const auto& l : params.layers) {
    if (l.weight.cols() != x.size()) throw DimensionError("MLP layer dimensions do not chain");
    VectorXd z = l.weight * x + l.bias;
    if (cache) {
      cache->inputs.push_back(x);
      cache->pre.push_back(z);
    }
    x = activate(l.activation, z);
  }
  return x;
}

VectorXd mlp_forward(const MlpParams& params, const VectorXd& f_human, const VectorXd& f_inter,
                     const VectorXd& f_obj, MlpCache* cache) {
  VectorXd input(f_human.size() + f_inter.size() + f_obj.size());
  input << f_human, f_inter, f_obj;
  return mlp_forward(params, input, cache);
}

VectorXd mlp_backward(const MlpParams& params, const MlpCache& cache, const VectorXd& grad_output,
                      MlpGradients& grads) {
  VectorXd g = grad_output;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const auto& l = params.layers[i];
    VectorXd delta = g.cwiseProduct(activation_slope(l.activation, cache.pre[i]));
    grads.weight[i].noalias() += delta * cache.inputs[i].transpose();
    grads.bias[i] += delta;
    g = l.weight.transpose() * delta;
  }
  return g;
}

Metric parse_metric(std::string_view text) {
  if (text == "l1") return Metric::l1;
  if (text == "neg_cosine") return Metric::neg_cosine;
  throw ValidationError(fmt::format("unknown metric \"{}\" (expected l1 or neg_cosine)", text));
}

std::string_view metric_name(Metric metric) { return metric == Metric::l1 ? "l1" : "neg_cosine"; }

Distance pair_distance(Metric metric, const VectorXd& f, const VectorXd& e) {
  if (f.size() != e.size()) throw DimensionError(fmt::format("vector sizes {} and {} differ", f.size(), e.size()));
  if (metric == Metric::l1) {
    VectorXd diff = f - e;
    VectorXd sign = diff.unaryExpr([](double d) { return d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0; });
    return {diff.cwiseAbs().sum(), sign};
  }
  const double nf = f.norm();
  const double ne = e.norm();
  if (nf == 0.0 || ne == 0.0) throw ZeroNormError();
  const double dot = f.dot(e);
  const double value = -dot / (nf * ne);
  VectorXd grad = -(e / (nf * ne) - (dot / (nf * nf * nf * ne)) * f);
  return {value, grad};
}

void EmbeddingBatch::validate() const {
  const std::size_t cells = k * k;
  if (k == 0) throw ValidationError("embedding batch has K = 0");
  if (model.size() != cells || text.size() != cells || mask.size() != cells)
    throw DimensionError(fmt::format("embedding batch needs {} cells of each kind", cells));
  const std::size_t model_dim = feature_dim ? 3 * *feature_dim : embed_dim;
  for (std::size_t c = 0; c < cells; ++c) {
    if (static_cast<std::size_t>(model[c].size()) != model_dim)
      throw DimensionError(fmt::format("cell {}: model vector has {} entries, expected {}", c, model[c].size(), model_dim));
    if (static_cast<std::size_t>(text[c].size()) != embed_dim)
      throw DimensionError(fmt::format("cell {}: text vector has {} entries, expected {}", c, text[c].size(), embed_dim));
    if (!model[c].allFinite() || !text[c].allFinite())
      throw ValidationError(fmt::format("cell {} has non-finite entries", c));
  }
  for (std::size_t i = 0; i < k; ++i)
    if (mask[cell(i, i)]) throw ValidationError(fmt::format("mask[{}][{}] is set on the diagonal", i, i));
}

namespace {

// Whitespace tokens with '#' comments removed, each tagged with its line.
struct Tokens {
  std::vector<std::pair<std::string, std::size_t>> items;
  std::size_t pos = 0;

  explicit Tokens(std::string_view text) {
    std::size_t line = 1;
    std::string current;
    bool comment = false;
    auto flush = [&] {
      if (!current.empty()) items.emplace_back(std::move(current), line);
      current.clear();
    };
    for (char c : text) {
      if (c == '\n') {
        flush();
        comment = false;
        ++line;
      } else if (comment) {
        continue;
      } else if (c == '#') {
        flush();
        comment = true;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        current += c;
      }
    }
    flush();
  }

  const std::pair<std::string, std::size_t>& next(std::string_view what) {
    if (pos >= items.size()) throw ParseError("end of file", fmt::format("missing {}", what));
    return items[pos++];
  }

  double number(std::string_view what) {
    const auto& [tok, line] = next(what);
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      if (used == tok.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ParseError(fmt::format("line {}, field {}", line, what), fmt::format("\"{}\" is not a finite number", tok));
  }

  std::size_t count(std::string_view what) {
    const auto& [tok, line] = next(what);
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9)
      throw ParseError(fmt::format("line {}, field {}", line, what), fmt::format("\"{}\" is not a count", tok));
    return std::stoul(tok);
  }
};

}  // namespace

EmbeddingBatch EmbeddingBatch::parse(std::string_view text) {
  Tokens t(text);
  EmbeddingBatch b;
  b.k = t.count("K");
  b.embed_dim = t.count("D_e");
  const auto& [metric, line] = t.next("metric");
  try {
    b.metric = parse_metric(metric);
  } catch (const ValidationError& e) {
    throw ParseError(fmt::format("line {}, field metric", line), e.what());
  }
  // An optional D_f sits on the header line.
  if (t.pos < t.items.size() && t.items[t.pos].second == line) b.feature_dim = t.count("D_f");
  if (b.k == 0 || b.embed_dim == 0 || (b.feature_dim && *b.feature_dim == 0))
    throw ParseError("line 1", "K, D_e and D_f must be positive");

  const std::size_t cells = b.k * b.k;
  const std::size_t model_dim = b.feature_dim ? 3 * *b.feature_dim : b.embed_dim;
  for (std::size_t c = 0; c < cells; ++c) {
    VectorXd v(model_dim);
    for (std::size_t d = 0; d < model_dim; ++d) v[d] = t.number(fmt::format("model[{}][{}]", c, d));
    b.model.push_back(std::move(v));
  }
  for (std::size_t c = 0; c < cells; ++c) {
    VectorXd v(b.embed_dim);
    for (std::size_t d = 0; d < b.embed_dim; ++d) v[d] = t.number(fmt::format("text[{}][{}]", c, d));
    b.text.push_back(std::move(v));
  }
  for (std::size_t c = 0; c < cells; ++c) {
    const auto& [tok, l] = t.next("mask");
    if (tok != "0" && tok != "1")
      throw ParseError(fmt::format("line {}, field mask[{}]", l, c), fmt::format("\"{}\" is not 0 or 1", tok));
    b.mask.push_back(tok == "1");
  }
  if (t.pos != t.items.size())
    throw ParseError(fmt::format("line {}", t.items[t.pos].second), "unexpected trailing data");
  b.validate();
  return b;
}

EmbeddingBatch EmbeddingBatch::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ", " + e.location(), e.what());
  }
}

std::string EmbeddingBatch::serialize() const {
  std::string out = fmt::format("{} {} {}", k, embed_dim, metric_name(metric));
  if (feature_dim) out += fmt::format(" {}", *feature_dim);
  out += '\n';
  auto vec = [&](const VectorXd& v) {
    for (Eigen::Index d = 0; d < v.size(); ++d) out += fmt::format("{}{}", d ? " " : "", v[d]);
    out += '\n';
  };
  out += "# model\n";
  for (const auto& v : model) vec(v);
  out += "# text\n";
  for (const auto& v : text) vec(v);
  out += "# mask\n";
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out += fmt::format("{}{}", j ? " " : "", mask[cell(i, j)] ? 1 : 0);
    out += '\n';
  }
  return out;
}

EmbeddingBatch random_embedding_batch(std::size_t k, std::size_t feature_dim, std::size_t embed_dim,
                                      Metric metric, std::uint64_t seed, double density) {
  if (k < 2) throw PreconditionError("a batch needs K >= 2 to hold an off-diagonal cell");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(density);
  EmbeddingBatch b;
  b.k = k;
  b.embed_dim = embed_dim;
  b.feature_dim = feature_dim;
  b.metric = metric;
  auto draw = [&](std::size_t n) {
    VectorXd v(n);
    for (std::size_t d = 0; d < n; ++d) v[d] = normal(rng);
    return v;
  };
  for (std::size_t c = 0; c < k * k; ++c) b.model.push_back(draw(3 * feature_dim));
  for (std::size_t c = 0; c < k * k; ++c) b.text.push_back(draw(embed_dim));
  bool any = false;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      bool on = i != j && coin(rng);
      any = any || on;
      b.mask.push_back(on);
    }
  if (!any) b.mask[b.cell(0, 1)] = true;
  return b;
}

TriEmbLoss tri_emb_loss(const std::vector<VectorXd>& f_model, const EmbeddingBatch& batch, Metric metric) {
  if (f_model.size() != batch.k * batch.k) throw DimensionError("fused grid does not match K x K");
  TriEmbLoss out;
  out.grad.reserve(f_model.size());
  for (std::size_t c = 0; c < f_model.size(); ++c) {
    if (!batch.mask[c]) {
      out.grad.push_back(VectorXd::Zero(f_model[c].size()));
      continue;
    }
    auto d = pair_distance(metric, f_model[c], batch.text[c]);
    out.value += d.value;
    out.grad.push_back(std::move(d.grad));
  }
  return out;
}

TriEmbLoss tri_emb_loss(const EmbeddingBatch& batch, Metric metric) {
  if (batch.pre_fusion()) throw PreconditionError("batch holds pre-fusion features; run them through an MLP first");
  return tri_emb_loss(batch.model, batch, metric);
}

double total_loss(double l_model, double l_tri, double lambda_clip) {
  if (lambda_clip < 0) throw PreconditionError("lambda_CLIP must be non-negative");
  return l_model + lambda_clip * l_tri;
}

namespace {

void require_pre_fusion(const MlpParams& params, const EmbeddingBatch& batch) {
  if (!batch.pre_fusion()) throw PreconditionError("batch cells must hold pre-fusion features");
  if (params.input_dim() != 3 * *batch.feature_dim || params.output_dim() != batch.embed_dim)
    throw DimensionError(fmt::format("MLP maps {} -> {} but the batch needs {} -> {}", params.input_dim(),
                                     params.output_dim(), 3 * *batch.feature_dim, batch.embed_dim));
}

}  // namespace

ParamLoss mlp_tri_emb_loss(const MlpParams& params, const EmbeddingBatch& batch, Metric metric) {
  require_pre_fusion(params, batch);
  ParamLoss out{0.0, MlpGradients::zeros_like(params)};
  MlpCache cache;
  for (std::size_t c = 0; c < batch.model.size(); ++c) {
    if (!batch.mask[c]) continue;
    VectorXd f = mlp_forward(params, batch.model[c], &cache);
    auto d = pair_distance(metric, f, batch.text[c]);
    out.value += d.value;
    mlp_backward(params, cache, d.grad, out.grads);
  }
  return out;
}

double mlp_tri_emb_value(const MlpParams& params, const EmbeddingBatch& batch, Metric metric) {
  require_pre_fusion(params, batch);
  double value = 0;
  for (std::size_t c = 0; c < batch.model.size(); ++c)
    if (batch.mask[c]) value += pair_distance(metric, mlp_forward(params, batch.model[c]), batch.text[c]).value;
  return value;
}

double relative_error(double analytic, double numeric) {
  double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

double finite_diff_check(const MlpParams& params, const EmbeddingBatch& batch, Metric metric, double h) {
  if (!(h > 0)) throw PreconditionError("finite-difference step h must be positive");
  auto analytic = mlp_tri_emb_loss(params, batch, metric);
  MlpParams probe = params;
  double worst = 0;
  for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
    double& x = probe.parameter(i);
    const double saved = x;
    x = saved + h;
    double up = mlp_tri_emb_value(probe, batch, metric);
    x = saved - h;
    double down = mlp_tri_emb_value(probe, batch, metric);
    x = saved;
    worst = std::max(worst, relative_error(analytic.grads.parameter(i), (up - down) / (2 * h)));
  }
  return worst;
}

double finite_diff_check_features(const EmbeddingBatch& batch, Metric metric, double h) {
  if (!(h > 0)) throw PreconditionError("finite-difference step h must be positive");
  auto analytic = tri_emb_loss(batch, metric);
  std::vector<VectorXd> probe = batch.model;
  double worst = 0;
  for (std::size_t c = 0; c < probe.size(); ++c) {
    for (Eigen::Index d = 0; d < probe[c].size(); ++d) {
      const double saved = probe[c][d];
      probe[c][d] = saved + h;
      double up = tri_emb_loss(probe, batch, metric).value;
      probe[c][d] = saved - h;
      double down = tri_emb_loss(probe, batch, metric).value;
      probe[c][d] = saved;
      worst = std::max(worst, relative_error(analytic.grad[c][d], (up - down) / (2 * h)));
    }
  }
  return worst;
}

DescentResult toy_descent(MlpParams& params, const EmbeddingBatch& batch, Metric metric, int steps,
                          double learning_rate) {
  if (learning_rate < 0) throw PreconditionError("learning rate must be non-negative");
  if (steps < 0) throw PreconditionError("step count must be non-negative");
  DescentResult out;
  int rising = 0;
  for (int s = 0; s <= steps; ++s) {
    auto current = mlp_tri_emb_loss(params, batch, metric);
    if (!out.losses.empty()) {
      rising = current.value > out.losses.back() ? rising + 1 : 0;
    }
    out.losses.push_back(current.value);
    if (rising >= 5) {
      out.diverged = true;
      break;
    }
    if (s == steps) break;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      params.layers[l].weight -= learning_rate * current.grads.weight[l];
      params.layers[l].bias -= learning_rate * current.grads.bias[l];
    }
  }
  return out;
}

std::string clip_text_template(std::string_view relation, std::string_view object_class) {
  std::string object = to_lower(object_class);
  bool vowel = !object.empty() && std::string_view("aeiou").find(object.front()) != std::string_view::npos;
  return fmt::format("A scene of a person {} {} {}", to_lower(relation), vowel ? "an" : "a", object);
}

}  // namespace hoir
