#include "fscil/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fscil {

namespace {

DenseLayer make_dense(std::size_t out_dim, std::size_t in_dim,
                      Activation activation, RandomStream& rng) {
  DenseLayer layer;
  layer.weights = Mat64(out_dim, in_dim);
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (double& w : layer.weights.values) w = stddev * rng.next_normal();
  layer.bias.assign(out_dim, 0.0);
  layer.activation = activation;
  return layer;
}

}  // namespace

Vec64 dense_forward(const DenseLayer& layer, const Vec64& x, DenseCache* cache) {
  Vec64 pre = linear_forward(layer.weights, layer.bias, x);
  if (cache != nullptr) {
    cache->input = x;
    cache->preactivation = pre;
  }
  if (layer.activation == Activation::kRelu) {
    for (double& v : pre) v = std::max(v, 0.0);
  }
  return pre;
}

LayerGrads zero_grads_like(const DenseLayer& layer) {
  LayerGrads g;
  g.weights = Mat64(layer.weights.rows, layer.weights.cols);
  g.bias.assign(layer.bias.size(), 0.0);
  return g;
}

void dense_backward(const DenseLayer& layer, const DenseCache& cache,
                    const Vec64& grad_out, LayerGrads& grads, Vec64& grad_x) {
  Vec64 grad_pre = grad_out;
  if (layer.activation == Activation::kRelu) {
    for (std::size_t i = 0; i < grad_pre.size(); ++i) {
      if (cache.preactivation[i] <= 0.0) grad_pre[i] = 0.0;
    }
  }
  linear_backward(layer.weights, cache.input, grad_pre, grads.weights, grads.bias,
                  grad_x);
}

MlpExtractor make_extractor(std::size_t input_dim,
                            const std::vector<std::size_t>& hidden_dims,
                            std::size_t feature_dim, RandomStream& rng) {
  if (input_dim == 0 || feature_dim == 0) {
    throw std::invalid_argument("make_extractor: zero dimension");
  }
  MlpExtractor extractor;
  std::size_t in_dim = input_dim;
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("make_extractor: zero hidden dim");
    extractor.layers.push_back(make_dense(h, in_dim, Activation::kRelu, rng));
    in_dim = h;
  }
  extractor.layers.push_back(
      make_dense(feature_dim, in_dim, Activation::kIdentity, rng));
  return extractor;
}

Vec64 extract_features(const MlpExtractor& extractor, const Vec64& x,
                       MlpCache* cache) {
  if (cache != nullptr) {
    cache->layers.resize(extractor.layers.size());
    cache->min_abs_relu_preact = std::numeric_limits<double>::infinity();
  }
  Vec64 h = x;
  for (std::size_t li = 0; li < extractor.layers.size(); ++li) {
    DenseCache* layer_cache = cache != nullptr ? &cache->layers[li] : nullptr;
    h = dense_forward(extractor.layers[li], h, layer_cache);
    if (cache != nullptr && extractor.layers[li].activation == Activation::kRelu) {
      for (double p : layer_cache->preactivation) {
        cache->min_abs_relu_preact = std::min(cache->min_abs_relu_preact, std::abs(p));
      }
    }
  }
  return h;
}

std::vector<LayerGrads> zero_grads_like(const MlpExtractor& extractor) {
  std::vector<LayerGrads> grads;
  grads.reserve(extractor.layers.size());
  for (const DenseLayer& layer : extractor.layers) {
    grads.push_back(zero_grads_like(layer));
  }
  return grads;
}

Vec64 extractor_backward(const MlpExtractor& extractor, const MlpCache& cache,
                         const Vec64& grad_features,
                         std::vector<LayerGrads>& grads) {
  if (cache.layers.size() != extractor.layers.size() ||
      grads.size() != extractor.layers.size()) {
    throw std::invalid_argument("extractor_backward: cache/grads mismatch");
  }
  Vec64 g = grad_features;
  for (std::size_t li = extractor.layers.size(); li-- > 0;) {
    Vec64 grad_in(extractor.layers[li].weights.cols, 0.0);
    dense_backward(extractor.layers[li], cache.layers[li], g, grads[li], grad_in);
    g = std::move(grad_in);
  }
  return g;
}

Vec64 class_cosines(const PrototypeClassifier& classifier, const Vec64& features) {
  Vec64 sims(classifier.prototypes.size());
  for (std::size_t c = 0; c < classifier.prototypes.size(); ++c) {
    sims[c] = cosine_similarity(features, classifier.prototypes[c]);
  }
  return sims;
}

Vec64 classify(const PrototypeClassifier& classifier, const Vec64& features) {
  if (classifier.prototypes.empty()) {
    throw std::invalid_argument("classify: empty classifier");
  }
  return stable_softmax(class_cosines(classifier, features));
}

std::uint32_t predict_label(const PrototypeClassifier& classifier,
                            const Vec64& features) {
  const Vec64 probs = classify(classifier, features);
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    // Exact ties resolve to the lowest class id.
    if (probs[c] > probs[best] ||
        (probs[c] == probs[best] &&
         classifier.class_ids[c] < classifier.class_ids[best])) {
      best = c;
    }
  }
  return classifier.class_ids[best];
}

Vec64 compute_prototype(const std::vector<Vec64>& features) {
  if (features.empty()) {
    throw std::invalid_argument("compute_prototype: empty feature set");
  }
  Vec64 mean(features.front().size(), 0.0);
  for (const Vec64& f : features) {
    if (f.size() != mean.size()) {
      throw std::invalid_argument("compute_prototype: inconsistent dims");
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f[i];
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (double& v : mean) v *= inv;
  return mean;
}

StatisticsHead make_statistics_head(std::size_t feature_dim, RandomStream& rng) {
  StatisticsHead head;
  head.mu = make_dense(feature_dim, feature_dim, Activation::kIdentity, rng);
  head.logvar = make_dense(feature_dim, feature_dim, Activation::kIdentity, rng);
  // The variance-calibration gradient carries an exp(logvar) factor, so the
  // raw log-variances must start well inside the contractive region: keep
  // the head's initial outputs a fraction of the extractor's feature scale
  // or gradient descent can run away before the penalty pulls them to zero.
  for (double& w : head.mu.weights.values) w *= 0.03;
  for (double& w : head.logvar.weights.values) w *= 0.03;
  return head;
}

StatisticsHead make_zero_statistics_head(std::size_t feature_dim) {
  StatisticsHead head;
  head.mu.weights = Mat64(feature_dim, feature_dim);
  head.mu.bias.assign(feature_dim, 0.0);
  head.logvar.weights = Mat64(feature_dim, feature_dim);
  head.logvar.bias.assign(feature_dim, 0.0);
  return head;
}

GaussianStats predict_statistics(const StatisticsHead& head, const Vec64& features,
                                 StatsCache* cache) {
  GaussianStats stats;
  stats.mu_hat = dense_forward(head.mu, features, cache ? &cache->mu : nullptr);
  Vec64 raw = dense_forward(head.logvar, features, cache ? &cache->logvar : nullptr);
  if (cache != nullptr) cache->logvar_raw = raw;
  stats.logvar_hat = std::move(raw);
  for (double& v : stats.logvar_hat) v = std::clamp(v, kLogVarMin, kLogVarMax);
  return stats;
}

StatsHeadGrads zero_grads_like(const StatisticsHead& head) {
  StatsHeadGrads g;
  g.mu = zero_grads_like(head.mu);
  g.logvar = zero_grads_like(head.logvar);
  return g;
}

void statistics_backward(const StatisticsHead& head, const StatsCache& cache,
                         const Vec64& grad_mu, const Vec64& grad_logvar,
                         StatsHeadGrads& grads, Vec64& grad_features) {
  dense_backward(head.mu, cache.mu, grad_mu, grads.mu, grad_features);
  Vec64 grad_raw = grad_logvar;
  for (std::size_t i = 0; i < grad_raw.size(); ++i) {
    if (cache.logvar_raw[i] <= kLogVarMin || cache.logvar_raw[i] >= kLogVarMax) {
      grad_raw[i] = 0.0;
    }
  }
  dense_backward(head.logvar, cache.logvar, grad_raw, grads.logvar, grad_features);
}

Vec64 perturb(const Vec64& features, const GaussianStats& stats) {
  if (stats.mu_hat.size() != features.size() ||
      stats.logvar_hat.size() != features.size()) {
    throw std::invalid_argument("perturb: dimension mismatch");
  }
  Vec64 out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out[i] = stats.mu_hat[i] + std::exp(0.5 * stats.logvar_hat[i]) * features[i];
  }
  return out;
}

void perturb_backward(const Vec64& features, const GaussianStats& stats,
                      const Vec64& grad_out, Vec64& grad_mu, Vec64& grad_logvar,
                      Vec64& grad_features) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double sigma = std::exp(0.5 * stats.logvar_hat[i]);
    grad_mu[i] += grad_out[i];
    grad_logvar[i] += grad_out[i] * features[i] * 0.5 * sigma;
    grad_features[i] += grad_out[i] * sigma;
  }
}

}  // namespace fscil
