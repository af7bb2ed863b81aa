#include "fscil/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace fscil {

namespace {

GradientBundle zero_bundle(const MlpExtractor* extractor,
                           const PrototypeClassifier& classifier,
                           const StatisticsHead* head) {
  GradientBundle bundle;
  if (extractor != nullptr) bundle.extractor = zero_grads_like(*extractor);
  bundle.prototypes.resize(classifier.num_classes());
  for (std::size_t c = 0; c < classifier.num_classes(); ++c) {
    bundle.prototypes[c].assign(classifier.prototypes[c].size(), 0.0);
  }
  if (head != nullptr) {
    bundle.head = zero_grads_like(*head);
    bundle.has_head = true;
  }
  return bundle;
}

// CE backward for one sample: pushes gradients into the prototypes and
// returns the gradient w.r.t. the classified vector.
Vec64 ce_sample_backward(const PrototypeClassifier& classifier, const Vec64& vec,
                         const Vec64& similarities, std::size_t target,
                         double inv_batch, GradientBundle& bundle) {
  Vec64 grad_sims = ce_grad_wrt_similarities(similarities, target);
  Vec64 grad_vec(vec.size(), 0.0);
  for (std::size_t c = 0; c < classifier.num_classes(); ++c) {
    const double g = grad_sims[c] * inv_batch;
    if (g == 0.0) continue;
    cosine_backward(vec, classifier.prototypes[c], g, grad_vec,
                    bundle.prototypes[c]);
  }
  return grad_vec;
}

}  // namespace

LossValue base_objective(const MlpExtractor& extractor, const StatisticsHead* head,
                         const PrototypeClassifier& classifier,
                         const std::vector<Vec64>& inputs,
                         const std::vector<std::size_t>& targets, double gamma,
                         BaseTape* tape) {
  const std::size_t batch = inputs.size();
  if (batch == 0 || targets.size() != batch) {
    throw std::invalid_argument("base_objective: batch mismatch");
  }
  const bool use_head = head != nullptr && gamma != 0.0;
  if (tape != nullptr) {
    *tape = BaseTape{};
    tape->inputs = inputs;
    tape->targets = targets;
    tape->gamma = gamma;
    tape->has_head = use_head;
    tape->mlp.resize(batch);
    tape->features.resize(batch);
    tape->similarities.resize(batch);
    if (use_head) {
      tape->stats_cache.resize(batch);
      tape->stats.resize(batch);
    }
  }
  double ce = 0.0;
  std::vector<Vec64> logvars;
  if (use_head) logvars.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    MlpCache local_cache;
    MlpCache* cache = tape != nullptr ? &tape->mlp[b] : &local_cache;
    const Vec64 f = extract_features(extractor, inputs[b], cache);
    const Vec64 sims = class_cosines(classifier, f);
    ce += ce_from_similarities(sims, targets[b]);
    if (use_head) {
      StatsCache* sc = tape != nullptr ? &tape->stats_cache[b] : nullptr;
      GaussianStats stats = predict_statistics(*head, f, sc);
      logvars[b] = stats.logvar_hat;
      if (tape != nullptr) tape->stats[b] = std::move(stats);
    }
    if (tape != nullptr) {
      tape->features[b] = f;
      tape->similarities[b] = sims;
    }
  }
  ce /= static_cast<double>(batch);
  LossValue out;
  out.components["ce"] = ce;
  out.value = ce;
  if (use_head) {
    const double ccl = ccl_loss(logvars);
    out.components["ccl"] = ccl;
    out.value += gamma * ccl;
  }
  return out;
}

GradientBundle base_objective_backward(const MlpExtractor& extractor,
                                       const StatisticsHead* head,
                                       const PrototypeClassifier& classifier,
                                       const BaseTape& tape) {
  const std::size_t batch = tape.inputs.size();
  if (batch == 0 || tape.features.size() != batch) {
    throw std::invalid_argument(
        "base_objective_backward: tape missing or incomplete");
  }
  if (tape.has_head && head == nullptr) {
    throw std::invalid_argument("base_objective_backward: tape expects a head");
  }
  GradientBundle bundle =
      zero_bundle(&extractor, classifier, tape.has_head ? head : nullptr);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Vec64 grad_features =
        ce_sample_backward(classifier, tape.features[b], tape.similarities[b],
                           tape.targets[b], inv_batch, bundle);
    if (tape.has_head) {
      const Vec64& lv = tape.stats[b].logvar_hat;
      Vec64 grad_logvar(lv.size());
      for (std::size_t i = 0; i < lv.size(); ++i) {
        grad_logvar[i] = tape.gamma * (std::exp(lv[i]) - 1.0) * 0.5 * inv_batch;
      }
      const Vec64 grad_mu(lv.size(), 0.0);
      statistics_backward(*head, tape.stats_cache[b], grad_mu, grad_logvar,
                          bundle.head, grad_features);
    }
    extractor_backward(extractor, tape.mlp[b], grad_features, bundle.extractor);
  }
  return bundle;
}

LossValue ccl_objective(const MlpExtractor& extractor, const StatisticsHead& head,
                        const std::vector<Vec64>& inputs, BaseTape* tape) {
  const std::size_t batch = inputs.size();
  if (batch == 0) throw std::invalid_argument("ccl_objective: empty batch");
  if (tape != nullptr) {
    *tape = BaseTape{};
    tape->inputs = inputs;
    tape->gamma = 1.0;
    tape->has_head = true;
    tape->mlp.resize(batch);
    tape->features.resize(batch);
    tape->stats_cache.resize(batch);
    tape->stats.resize(batch);
  }
  std::vector<Vec64> logvars(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    MlpCache local_cache;
    MlpCache* cache = tape != nullptr ? &tape->mlp[b] : &local_cache;
    const Vec64 f = extract_features(extractor, inputs[b], cache);
    StatsCache* sc = tape != nullptr ? &tape->stats_cache[b] : nullptr;
    GaussianStats stats = predict_statistics(head, f, sc);
    logvars[b] = stats.logvar_hat;
    if (tape != nullptr) {
      tape->features[b] = f;
      tape->stats[b] = std::move(stats);
    }
  }
  LossValue out;
  out.components["ccl"] = ccl_loss(logvars);
  out.value = out.components["ccl"];
  return out;
}

GradientBundle ccl_objective_backward(const MlpExtractor& extractor,
                                      const StatisticsHead& head,
                                      const BaseTape& tape) {
  const std::size_t batch = tape.inputs.size();
  if (batch == 0 || !tape.has_head) {
    throw std::invalid_argument("ccl_objective_backward: bad tape");
  }
  PrototypeClassifier empty;
  GradientBundle bundle = zero_bundle(&extractor, empty, &head);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Vec64& lv = tape.stats[b].logvar_hat;
    Vec64 grad_logvar(lv.size());
    for (std::size_t i = 0; i < lv.size(); ++i) {
      grad_logvar[i] = (std::exp(lv[i]) - 1.0) * 0.5 * inv_batch;
    }
    const Vec64 grad_mu(lv.size(), 0.0);
    Vec64 grad_features(tape.features[b].size(), 0.0);
    statistics_backward(head, tape.stats_cache[b], grad_mu, grad_logvar,
                        bundle.head, grad_features);
    extractor_backward(extractor, tape.mlp[b], grad_features, bundle.extractor);
  }
  return bundle;
}

LossValue incremental_objective(const StatisticsHead& head,
                                const PrototypeClassifier& classifier,
                                const std::vector<Vec64>& features,
                                const std::vector<std::size_t>& targets,
                                const std::vector<Vec64>& prior_means, double alpha,
                                IncrementalTape* tape) {
  const std::size_t batch = features.size();
  if (batch == 0 || targets.size() != batch || prior_means.size() != batch) {
    throw std::invalid_argument("incremental_objective: batch mismatch");
  }
  if (tape != nullptr) {
    *tape = IncrementalTape{};
    tape->features = features;
    tape->targets = targets;
    tape->prior_means = prior_means;
    tape->alpha = alpha;
    tape->stats_cache.resize(batch);
    tape->stats.resize(batch);
    tape->perturbed.resize(batch);
    tape->sims_clean.resize(batch);
    tape->sims_perturbed.resize(batch);
  }
  double ce_clean = 0.0;
  double ce_pert = 0.0;
  double kl = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    StatsCache* sc = tape != nullptr ? &tape->stats_cache[b] : nullptr;
    const GaussianStats stats = predict_statistics(head, features[b], sc);
    Vec64 perturbed = perturb(features[b], stats);
    Vec64 sims_clean = class_cosines(classifier, features[b]);
    Vec64 sims_perturbed = class_cosines(classifier, perturbed);
    ce_clean += ce_from_similarities(sims_clean, targets[b]);
    ce_pert += ce_from_similarities(sims_perturbed, targets[b]);
    kl += kl_to_prior(stats, prior_means[b]);
    if (tape != nullptr) {
      tape->stats[b] = stats;
      tape->perturbed[b] = std::move(perturbed);
      tape->sims_clean[b] = std::move(sims_clean);
      tape->sims_perturbed[b] = std::move(sims_perturbed);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch);
  LossValue out;
  out.components["ce_clean"] = ce_clean * inv;
  out.components["ce_perturbed"] = ce_pert * inv;
  out.components["kl"] = kl * inv;
  out.value = out.components["ce_clean"] + out.components["ce_perturbed"] +
              alpha * out.components["kl"];
  return out;
}

GradientBundle incremental_objective_backward(const StatisticsHead& head,
                                              const PrototypeClassifier& classifier,
                                              const IncrementalTape& tape) {
  const std::size_t batch = tape.features.size();
  if (batch == 0 || tape.perturbed.size() != batch) {
    throw std::invalid_argument(
        "incremental_objective_backward: tape missing or incomplete");
  }
  GradientBundle bundle = zero_bundle(nullptr, classifier, &head);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const std::size_t dim = tape.features.front().size();
  for (std::size_t b = 0; b < batch; ++b) {
    // Clean-feature cross entropy reaches only the prototypes.
    ce_sample_backward(classifier, tape.features[b], tape.sims_clean[b],
                       tape.targets[b], inv_batch, bundle);
    // Perturbed-feature cross entropy reaches prototypes and, through the
    // perturbation, the statistics head.
    Vec64 grad_perturbed =
        ce_sample_backward(classifier, tape.perturbed[b], tape.sims_perturbed[b],
                           tape.targets[b], inv_batch, bundle);
    Vec64 grad_mu(dim, 0.0);
    Vec64 grad_logvar(dim, 0.0);
    Vec64 grad_features_unused(dim, 0.0);
    perturb_backward(tape.features[b], tape.stats[b], grad_perturbed, grad_mu,
                     grad_logvar, grad_features_unused);
    kl_backward(tape.stats[b], tape.prior_means[b], tape.alpha * inv_batch,
                grad_mu, grad_logvar);
    statistics_backward(head, tape.stats_cache[b], grad_mu, grad_logvar,
                        bundle.head, grad_features_unused);
  }
  return bundle;
}

}  // namespace fscil
