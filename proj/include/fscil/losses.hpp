#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fscil/mathcore.hpp"
#include "fscil/model.hpp"

namespace fscil {

// Scalar objective plus its named addends (pre-weighting), e.g. {"ce", "ccl"}.
struct LossValue {
  double value = 0.0;
  std::map<std::string, double> components;
};

struct Hyperparams {
  double gamma = 0.01;  // variance-calibration weight in the base objective
  double alpha = 0.01;  // prior-matching weight in the incremental objective
};

// Probability of a prediction falls below this only in pathological cases;
// the floor keeps -log finite.
inline constexpr double kProbFloor = 1e-12;

// Cross entropy of a probability vector (as produced by classify) against
// label_index: -log of the probability, floored at kProbFloor.
double ce_cosine_loss(const Vec64& probabilities, std::size_t label_index);

// Same loss evaluated from similarity logits: softmax, then the floored
// negative log. Equal to ce_cosine_loss(stable_softmax(s), label).
double ce_from_similarities(const Vec64& similarities, std::size_t label_index);

// d(ce_from_similarities)/d(similarities): softmax(s) - onehot(label). Zero
// when the label probability sits on the kProbFloor floor.
Vec64 ce_grad_wrt_similarities(const Vec64& similarities,
                               std::size_t label_index);

// Variance-calibration penalty over a batch of log-variance vectors:
//   -1/(2B) * sum_b sum_i (1 + lv_i - exp(lv_i)).
// Nonnegative, and zero exactly when every log-variance entry is zero, so
// minimizing it pulls every predicted variance toward the same fixed point.
double ccl_loss(const std::vector<Vec64>& logvars);

// Elementwise gradient of ccl_loss: (exp(lv_i) - 1) / (2B).
std::vector<Vec64> ccl_grad(const std::vector<Vec64>& logvars);

// One sample's cross entropy plus gamma times the variance-calibration
// penalty of a log-variance batch. Components: "ce", "ccl".
LossValue base_loss(const Vec64& probabilities, std::size_t label_index,
                    const std::vector<Vec64>& logvars, const Hyperparams& hp);

// Softmax weights over the other classes: weight of class c != own is
// exp(cos(f, P_c)) normalized over all classes except own_index; the own
// class gets weight exactly 0. Throws unless the classifier has at least
// two classes.
struct SimilarityWeights {
  Vec64 weights;  // parallel to classifier storage order, sums to 1
  std::size_t own_index = 0;
};

SimilarityWeights similarity_scores(const Vec64& features,
                                    const PrototypeClassifier& classifier,
                                    std::size_t own_index);

// Weighted combination of the other classes' prototypes.
Vec64 prior_mean(const SimilarityWeights& weights,
                 const PrototypeClassifier& classifier);

// KL(N(mu_hat, diag(exp(logvar_hat))) || N(prior_mu, I)) =
//   1/2 * sum_i (exp(lv_i) + (mu_i - prior_i)^2 - 1 - lv_i).
double kl_to_prior(const GaussianStats& stats, const Vec64& prior_mu);

// Accumulates upstream-scaled KL gradients w.r.t. mu_hat and logvar_hat.
// prior_mu is treated as a constant.
void kl_backward(const GaussianStats& stats, const Vec64& prior_mu,
                 double upstream, Vec64& grad_mu, Vec64& grad_logvar);

// One sample's incremental-session objective: cross entropy on the clean
// features, cross entropy on their perturbation, plus alpha times the KL to
// the sample's prior. Components: "ce_clean", "ce_perturbed", "kl".
LossValue incremental_loss(const Vec64& features, const Vec64& perturbed,
                           const PrototypeClassifier& classifier,
                           std::size_t label_index, const GaussianStats& stats,
                           const Vec64& prior_mu, const Hyperparams& hp);

}  // namespace fscil
