#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fscil/mathcore.hpp"
#include "fscil/random.hpp"

namespace fscil {

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
  Mat64 weights;
  Vec64 bias;
  Activation activation = Activation::kIdentity;
};

// Per-layer cache of one forward pass, consumed by dense_backward.
struct DenseCache {
  Vec64 input;
  Vec64 preactivation;
};

Vec64 dense_forward(const DenseLayer& layer, const Vec64& x, DenseCache* cache);

struct LayerGrads {
  Mat64 weights;
  Vec64 bias;
};

LayerGrads zero_grads_like(const DenseLayer& layer);

// Backprop through one dense layer. relu'(0) is taken as 0. Accumulates
// parameter gradients and adds the input gradient into grad_x.
void dense_backward(const DenseLayer& layer, const DenseCache& cache,
                    const Vec64& grad_out, LayerGrads& grads, Vec64& grad_x);

// Stack of dense layers mapping raw inputs to feature vectors. Hidden
// layers use relu; the output layer is linear.
struct MlpExtractor {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weights.cols; }
  std::size_t feature_dim() const { return layers.back().weights.rows; }
};

// Init: weights ~ N(0, 2/fan_in), biases zero.
MlpExtractor make_extractor(std::size_t input_dim,
                            const std::vector<std::size_t>& hidden_dims,
                            std::size_t feature_dim, RandomStream& rng);

struct MlpCache {
  std::vector<DenseCache> layers;
  // Smallest |preactivation| seen across relu layers; lets finite-difference
  // checks reject configurations that straddle a relu kink.
  double min_abs_relu_preact = 0.0;
};

Vec64 extract_features(const MlpExtractor& extractor, const Vec64& x,
                       MlpCache* cache = nullptr);

std::vector<LayerGrads> zero_grads_like(const MlpExtractor& extractor);

// Backprop through the whole extractor, returning d(loss)/d(input).
Vec64 extractor_backward(const MlpExtractor& extractor, const MlpCache& cache,
                         const Vec64& grad_features,
                         std::vector<LayerGrads>& grads);

// Cosine-similarity classifier over per-class prototype vectors. Prototypes
// are stored unnormalized; classify() is scale-invariant through the cosine.
struct PrototypeClassifier {
  std::vector<Vec64> prototypes;
  std::vector<std::uint32_t> class_ids;  // parallel to prototypes, ascending

  std::size_t num_classes() const { return prototypes.size(); }
};

// Cosine similarity of features against every prototype, in storage order.
Vec64 class_cosines(const PrototypeClassifier& classifier, const Vec64& features);

// Class probabilities: softmax over the cosine similarities. Sums to 1.
Vec64 classify(const PrototypeClassifier& classifier, const Vec64& features);

// Argmax over classify; ties resolve to the lowest class id.
std::uint32_t predict_label(const PrototypeClassifier& classifier,
                            const Vec64& features);

// Arithmetic mean of feature vectors. Throws on empty input.
Vec64 compute_prototype(const std::vector<Vec64>& features);

// Predicted per-dimension Gaussian statistics of a feature vector.
struct GaussianStats {
  Vec64 mu_hat;
  Vec64 logvar_hat;  // clamped to [kLogVarMin, kLogVarMax]
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Two single dense heads over features: one for the mean, one for the
// log-variance. The log-variance output is clamped for numeric safety.
struct StatisticsHead {
  DenseLayer mu;
  DenseLayer logvar;
};

StatisticsHead make_statistics_head(std::size_t feature_dim, RandomStream& rng);
StatisticsHead make_zero_statistics_head(std::size_t feature_dim);

struct StatsCache {
  DenseCache mu;
  DenseCache logvar;
  Vec64 logvar_raw;  // before clamping
};

GaussianStats predict_statistics(const StatisticsHead& head, const Vec64& features,
                                 StatsCache* cache = nullptr);

struct StatsHeadGrads {
  LayerGrads mu;
  LayerGrads logvar;
};

StatsHeadGrads zero_grads_like(const StatisticsHead& head);

// Backprop through both heads; clamp saturation zeroes the log-variance
// gradient. Adds the feature gradient into grad_features.
void statistics_backward(const StatisticsHead& head, const StatsCache& cache,
                         const Vec64& grad_mu, const Vec64& grad_logvar,
                         StatsHeadGrads& grads, Vec64& grad_features);

// Deterministic feature perturbation: mu_hat + exp(logvar_hat / 2) * f,
// elementwise. No sampling is involved.
Vec64 perturb(const Vec64& features, const GaussianStats& stats);

// Backprop through perturb, accumulating into the three gradients.
void perturb_backward(const Vec64& features, const GaussianStats& stats,
                      const Vec64& grad_out, Vec64& grad_mu, Vec64& grad_logvar,
                      Vec64& grad_features);

// All trainable-parameter gradients for one optimization step.
struct GradientBundle {
  std::vector<LayerGrads> extractor;
  std::vector<Vec64> prototypes;
  StatsHeadGrads head;
  bool has_head = false;
};

}  // namespace fscil
