#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hoir {

enum class Activation { relu, tanh, identity };

struct MlpLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;
};

/// Affine + activation stack over cat(f_human, f_inter, f_obj).
struct MlpParams {
  std::vector<MlpLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  /// Flat view over every weight (column-major) and bias, layer by layer.
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  /// Throws DimensionError when adjacent layers do not fit together and
  /// ValidationError on non-finite entries.
  void validate() const;

  /// dims = {3*D_f, hidden..., D_e}; activations has dims.size()-1 entries.
  /// Weights ~ N(0, 1/fan_in), zero biases.
  static MlpParams random(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
                          std::uint64_t seed);
  /// D_f=64, one hidden layer of 128 with relu, D_e=64, identity output.
  static MlpParams default_shape(std::uint64_t seed);
};

struct MlpCache {
  std::vector<Eigen::VectorXd> inputs;  // input of each layer
  std::vector<Eigen::VectorXd> pre;     // pre-activation of each layer
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static MlpGradients zeros_like(const MlpParams& params);
  double parameter(std::size_t index) const;
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input, MlpCache* cache = nullptr);
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& f_human,
                            const Eigen::VectorXd& f_inter, const Eigen::VectorXd& f_obj,
                            MlpCache* cache = nullptr);
/// Accumulates dL/dparams into `grads` given dL/doutput; returns dL/dinput.
Eigen::VectorXd mlp_backward(const MlpParams& params, const MlpCache& cache, const Eigen::VectorXd& grad_output,
                             MlpGradients& grads);

enum class Metric { l1, neg_cosine };
Metric parse_metric(std::string_view text);
std::string_view metric_name(Metric metric);

struct Distance {
  double value = 0;
  Eigen::VectorXd grad;  // with respect to f
};

/// l1: sum |f-e| with subgradient sign(f-e), 0 at ties. neg_cosine:
/// -(f.e)/(|f||e|); throws ZeroNormError for a zero vector.
Distance pair_distance(Metric metric, const Eigen::VectorXd& f, const Eigen::VectorXd& e);

/// K x K grid of cells in row-major order (cell = i*K + j).
struct EmbeddingBatch {
  std::size_t k = 0;
  std::size_t embed_dim = 0;                  // D_e
  std::optional<std::size_t> feature_dim;     // D_f when cells hold pre-fusion features
  Metric metric = Metric::neg_cosine;
  std::vector<Eigen::VectorXd> model;         // f_ij, or cat(f_human, f_inter, f_obj)
  std::vector<Eigen::VectorXd> text;          // e_ij
  std::vector<char> mask;                     // diagonal always false

  std::size_t cell(std::size_t i, std::size_t j) const { return i * k + j; }
  bool pre_fusion() const { return feature_dim.has_value(); }
  /// Throws DimensionError or ValidationError on broken invariants.
  void validate() const;

  /// Text layout: header "K D_e metric [D_f]", then K*K model vectors, K*K
  /// text vectors and K rows of K mask bits, whitespace separated; '#'
  /// starts a comment. Throws ParseError.
  static EmbeddingBatch parse(std::string_view text);
  static EmbeddingBatch load(const std::filesystem::path& path);
  std::string serialize() const;
};

/// Seeded batch with pre-fusion cells, Gaussian entries and a random
/// off-diagonal mask holding at least one true cell.
EmbeddingBatch random_embedding_batch(std::size_t k, std::size_t feature_dim, std::size_t embed_dim,
                                      Metric metric, std::uint64_t seed, double density = 0.5);

struct TriEmbLoss {
  double value = 0;
  std::vector<Eigen::VectorXd> grad;  // per cell, zero where the mask is false
};

/// Sum over masked cells i != j of rho(f_ij, e_ij), for a fused-form grid.
TriEmbLoss tri_emb_loss(const std::vector<Eigen::VectorXd>& f_model, const EmbeddingBatch& batch, Metric metric);
/// Same, for a batch whose cells already hold fused vectors.
TriEmbLoss tri_emb_loss(const EmbeddingBatch& batch, Metric metric);

/// L_model + lambda_clip * L_tri; throws PreconditionError for a negative lambda.
double total_loss(double l_model, double l_tri, double lambda_clip);

inline constexpr double kLambdaClipVidHoi = 0.05;
inline constexpr double kLambdaClipAg = 1.5;

struct ParamLoss {
  double value = 0;
  MlpGradients grads;
};

/// Loss of the MLP applied to every pre-fusion cell, with analytic gradients.
ParamLoss mlp_tri_emb_loss(const MlpParams& params, const EmbeddingBatch& batch, Metric metric);
double mlp_tri_emb_value(const MlpParams& params, const EmbeddingBatch& batch, Metric metric);

/// |a - n| / max(|a|, |n|, floor) for analytic a and numeric n.
inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

/// Central differences over every MLP parameter; the largest relative error.
/// Throws PreconditionError when h <= 0.
double finite_diff_check(const MlpParams& params, const EmbeddingBatch& batch, Metric metric, double h);
/// Same over the fused vectors of a fused-form batch.
double finite_diff_check_features(const EmbeddingBatch& batch, Metric metric, double h);

struct DescentResult {
  std::vector<double> losses;  // losses[0] before the first step
  bool diverged = false;       // stopped after 5 consecutive increases
};

/// Plain gradient descent on the MLP parameters against L_tri.
DescentResult toy_descent(MlpParams& params, const EmbeddingBatch& batch, Metric metric, int steps,
                          double learning_rate);

/// "A scene of a person {relation} {a|an} {object}", with "an" before a
/// vowel, e.g. "A scene of a person hold an apple".
std::string clip_text_template(std::string_view relation, std::string_view object_class);

}  // namespace hoir
