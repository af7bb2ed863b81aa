#include "fscil/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fscil {

double ce_cosine_loss(const Vec64& probabilities, std::size_t label_index) {
  if (label_index >= probabilities.size()) {
    throw std::invalid_argument("ce_cosine_loss: label out of range");
  }
  return -std::log(std::max(probabilities[label_index], kProbFloor));
}

double ce_from_similarities(const Vec64& similarities, std::size_t label_index) {
  if (label_index >= similarities.size()) {
    throw std::invalid_argument("ce_from_similarities: label out of range");
  }
  return ce_cosine_loss(stable_softmax(similarities), label_index);
}

Vec64 ce_grad_wrt_similarities(const Vec64& similarities,
                               std::size_t label_index) {
  if (label_index >= similarities.size()) {
    throw std::invalid_argument("ce_grad_wrt_similarities: label out of range");
  }
  Vec64 probs = stable_softmax(similarities);
  if (probs[label_index] < kProbFloor) {
    return Vec64(similarities.size(), 0.0);
  }
  probs[label_index] -= 1.0;
  return probs;
}

double ccl_loss(const std::vector<Vec64>& logvars) {
  if (logvars.empty()) throw std::invalid_argument("ccl_loss: empty batch");
  double acc = 0.0;
  for (const Vec64& lv : logvars) {
    for (double v : lv) acc += 1.0 + v - std::exp(v);
  }
  return -acc / (2.0 * static_cast<double>(logvars.size()));
}

std::vector<Vec64> ccl_grad(const std::vector<Vec64>& logvars) {
  if (logvars.empty()) throw std::invalid_argument("ccl_grad: empty batch");
  const double inv2b = 1.0 / (2.0 * static_cast<double>(logvars.size()));
  std::vector<Vec64> grads(logvars.size());
  for (std::size_t b = 0; b < logvars.size(); ++b) {
    grads[b].resize(logvars[b].size());
    for (std::size_t i = 0; i < logvars[b].size(); ++i) {
      grads[b][i] = (std::exp(logvars[b][i]) - 1.0) * inv2b;
    }
  }
  return grads;
}

LossValue base_loss(const Vec64& probabilities, std::size_t label_index,
                    const std::vector<Vec64>& logvars, const Hyperparams& hp) {
  LossValue out;
  out.components["ce"] = ce_cosine_loss(probabilities, label_index);
  out.components["ccl"] = ccl_loss(logvars);
  out.value = out.components["ce"] + hp.gamma * out.components["ccl"];
  return out;
}

SimilarityWeights similarity_scores(const Vec64& features,
                                    const PrototypeClassifier& classifier,
                                    std::size_t own_index) {
  const std::size_t n = classifier.num_classes();
  if (own_index >= n) {
    throw std::invalid_argument("similarity_scores: own_index out of range");
  }
  if (n < 2) {
    throw std::invalid_argument("similarity_scores: need at least two classes");
  }
  const Vec64 sims = class_cosines(classifier, features);
  double max_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    if (c != own_index) max_other = std::max(max_other, sims[c]);
  }
  SimilarityWeights out;
  out.own_index = own_index;
  out.weights.assign(n, 0.0);
  double denom = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (c == own_index) continue;
    out.weights[c] = std::exp(sims[c] - max_other);
    denom += out.weights[c];
  }
  for (std::size_t c = 0; c < n; ++c) out.weights[c] /= denom;
  return out;
}

Vec64 prior_mean(const SimilarityWeights& weights,
                 const PrototypeClassifier& classifier) {
  if (weights.weights.size() != classifier.num_classes()) {
    throw std::invalid_argument("prior_mean: weight/classifier mismatch");
  }
  Vec64 mean(classifier.prototypes.front().size(), 0.0);
  for (std::size_t c = 0; c < classifier.num_classes(); ++c) {
    const double w = weights.weights[c];
    if (w == 0.0) continue;
    const Vec64& proto = classifier.prototypes[c];
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w * proto[i];
  }
  return mean;
}

double kl_to_prior(const GaussianStats& stats, const Vec64& prior_mu) {
  if (stats.mu_hat.size() != prior_mu.size() ||
      stats.logvar_hat.size() != prior_mu.size()) {
    throw std::invalid_argument("kl_to_prior: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prior_mu.size(); ++i) {
    const double lv = stats.logvar_hat[i];
    const double dm = stats.mu_hat[i] - prior_mu[i];
    acc += std::exp(lv) + dm * dm - 1.0 - lv;
  }
  return 0.5 * acc;
}

void kl_backward(const GaussianStats& stats, const Vec64& prior_mu,
                 double upstream, Vec64& grad_mu, Vec64& grad_logvar) {
  for (std::size_t i = 0; i < prior_mu.size(); ++i) {
    grad_mu[i] += upstream * (stats.mu_hat[i] - prior_mu[i]);
    grad_logvar[i] += upstream * 0.5 * (std::exp(stats.logvar_hat[i]) - 1.0);
  }
}

LossValue incremental_loss(const Vec64& features, const Vec64& perturbed,
                           const PrototypeClassifier& classifier,
                           std::size_t label_index, const GaussianStats& stats,
                           const Vec64& prior_mu, const Hyperparams& hp) {
  LossValue out;
  out.components["ce_clean"] =
      ce_cosine_loss(classify(classifier, features), label_index);
  out.components["ce_perturbed"] =
      ce_cosine_loss(classify(classifier, perturbed), label_index);
  out.components["kl"] = kl_to_prior(stats, prior_mu);
  out.value = out.components["ce_clean"] + out.components["ce_perturbed"] +
              hp.alpha * out.components["kl"];
  return out;
}

}  // namespace fscil
