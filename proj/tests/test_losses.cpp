#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fscil/losses.hpp"
#include "fscil/random.hpp"

using namespace fscil;

TEST_CASE("cross entropy of a probability vector") {
  // Uniform over C classes costs ln C.
  CHECK(ce_cosine_loss({0.25, 0.25, 0.25, 0.25}, 2) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  // A certain prediction costs nothing.
  CHECK(ce_cosine_loss({0.0, 1.0}, 1) == 0.0);
  // Zero probability hits the floor instead of -log(0).
  CHECK(ce_cosine_loss({1.0, 0.0}, 1) ==
        doctest::Approx(-std::log(kProbFloor)));
  CHECK_THROWS_AS(ce_cosine_loss({1.0, 0.0}, 2), std::invalid_argument);
}

TEST_CASE("cross entropy from similarity logits has the closed form") {
  // softmax([1,0])[0] = e/(e+1); -log of it:
  CHECK(std::abs(ce_from_similarities({1.0, 0.0}, 0) - 0.31326168751822286) <
        1e-15);
  // Wrong class: -log(1/(e+1)) = 1 + the above.
  CHECK(ce_from_similarities({1.0, 0.0}, 1) ==
        doctest::Approx(1.31326168751822286).epsilon(1e-12));
  CHECK(ce_from_similarities({0.3, -0.2}, 1) ==
        doctest::Approx(ce_cosine_loss(stable_softmax({0.3, -0.2}), 1))
            .epsilon(1e-15));
  CHECK_THROWS_AS(ce_from_similarities({1.0, 0.0}, 2), std::invalid_argument);
}

TEST_CASE("cross entropy gradient is softmax minus onehot") {
  const Vec64 sims{0.3, -0.2, 0.7};
  const Vec64 probs = stable_softmax(sims);
  const Vec64 grad = ce_grad_wrt_similarities(sims, 1);
  CHECK(grad[0] == doctest::Approx(probs[0]));
  CHECK(grad[1] == doctest::Approx(probs[1] - 1.0));
  CHECK(grad[2] == doctest::Approx(probs[2]));
  double sum = 0.0;
  for (double g : grad) sum += g;
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("variance penalty is zero exactly at zero log-variance") {
  CHECK(ccl_loss({{0.0, 0.0, 0.0}}) == 0.0);
  CHECK(ccl_loss({{0.0}, {0.0}}) == 0.0);
}

TEST_CASE("variance penalty frozen fixed points") {
  // Unit entry lv = 1 (variance e): (e - 2) / 2.
  CHECK(std::abs(ccl_loss({{1.0}}) - 0.35914091422952261) < 1e-6);
  // Variance 1/4: -(1 + ln(1/4) - 1/4) / 2 = ln(2) - 3/8.
  CHECK(std::abs(ccl_loss({{std::log(0.25)}}) - 0.3181471805599453) < 1e-6);
}

TEST_CASE("variance penalty is positive away from zero") {
  RandomStream rng(31, "ccl-positive");
  for (int trial = 0; trial < 100; ++trial) {
    Vec64 lv = rng.draw_normal(4);
    bool nonzero = false;
    for (double v : lv) nonzero = nonzero || v != 0.0;
    REQUIRE(nonzero);
    CHECK(ccl_loss({lv}) > 0.0);
  }
}

TEST_CASE("variance penalty averages over the batch") {
  const Vec64 a{0.5, -0.3};
  const Vec64 b{1.2, 0.1};
  const double batched = ccl_loss({a, b});
  CHECK(batched == doctest::Approx(0.5 * (ccl_loss({a}) + ccl_loss({b}))));
}

TEST_CASE("variance penalty gradient matches finite differences") {
  RandomStream rng(37, "ccl-grad");
  std::vector<Vec64> lvs = {rng.draw_normal(3), rng.draw_normal(3)};
  const std::vector<Vec64> grads = ccl_grad(lvs);
  const double h = 1e-6;
  for (std::size_t b = 0; b < lvs.size(); ++b) {
    for (std::size_t i = 0; i < lvs[b].size(); ++i) {
      const double x0 = lvs[b][i];
      lvs[b][i] = x0 + h;
      const double up = ccl_loss(lvs);
      lvs[b][i] = x0 - h;
      const double down = ccl_loss(lvs);
      lvs[b][i] = x0;
      CHECK(std::abs(grads[b][i] - (up - down) / (2.0 * h)) < 1e-8);
    }
  }
}

TEST_CASE("base loss combines its components") {
  const Vec64 probs = stable_softmax({1.0, 0.0});
  const std::vector<Vec64> lvs = {{1.0}, {1.0}};
  Hyperparams hp;
  hp.gamma = 0.25;
  const LossValue loss = base_loss(probs, 0, lvs, hp);
  const double ce = ce_cosine_loss(probs, 0);
  CHECK(loss.components.at("ce") == doctest::Approx(ce));
  CHECK(loss.components.at("ccl") == doctest::Approx(ccl_loss(lvs)));
  CHECK(loss.value == doctest::Approx(ce + 0.25 * ccl_loss(lvs)));

  // gamma = 0 reduces to plain cross entropy, exactly.
  hp.gamma = 0.0;
  CHECK(base_loss(probs, 0, lvs, hp).value == ce);

  // Unit variances zero the penalty regardless of gamma.
  hp.gamma = 0.7;
  CHECK(base_loss(probs, 0, {{0.0, 0.0}}, hp).value == ce);
}

namespace {

PrototypeClassifier axes_classifier() {
  PrototypeClassifier clf;
  clf.prototypes = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  clf.class_ids = {0, 1, 2};
  return clf;
}

}  // namespace

TEST_CASE("similarity weights exclude the own class and sum to one") {
  const PrototypeClassifier clf = axes_classifier();
  RandomStream rng(41, "simweights");
  for (int trial = 0; trial < 50; ++trial) {
    const Vec64 f = rng.draw_normal(3);
    const SimilarityWeights w = similarity_scores(f, clf, 1);
    CHECK(w.weights[1] == 0.0);
    CHECK(w.weights[0] > 0.0);
    CHECK(w.weights[2] > 0.0);
    CHECK(std::abs(w.weights[0] + w.weights[1] + w.weights[2] - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(similarity_scores({1.0, 0.0, 0.0}, clf, 5),
                  std::invalid_argument);
  PrototypeClassifier lone;
  lone.prototypes = {{1.0}};
  lone.class_ids = {0};
  CHECK_THROWS_AS(similarity_scores({1.0}, lone, 0), std::invalid_argument);
}

TEST_CASE("similarity weights follow the softmax of cosines") {
  const PrototypeClassifier clf = axes_classifier();
  const Vec64 f{1.0, 0.0, 0.0};  // cos = (1, 0, 0) against the three axes
  const SimilarityWeights w = similarity_scores(f, clf, 2);
  // Over classes {0, 1}: weights proportional to (e^1, e^0).
  const double e = std::exp(1.0);
  CHECK(w.weights[0] == doctest::Approx(e / (e + 1.0)));
  CHECK(w.weights[1] == doctest::Approx(1.0 / (e + 1.0)));
  CHECK(w.weights[2] == 0.0);
}

TEST_CASE("prior mean blends the other prototypes") {
  const PrototypeClassifier clf = axes_classifier();
  const Vec64 f{1.0, 0.0, 0.0};
  const SimilarityWeights w = similarity_scores(f, clf, 2);
  const Vec64 prior = prior_mean(w, clf);
  CHECK(prior[0] == doctest::Approx(w.weights[0]));
  CHECK(prior[1] == doctest::Approx(w.weights[1]));
  CHECK(prior[2] == 0.0);
}

TEST_CASE("kl to prior frozen case and zero point") {
  GaussianStats stats;
  stats.mu_hat = {0.7, -0.2};
  stats.logvar_hat = {std::log(4.0), std::log(4.0)};
  // Matching means, variance 4 per dim: KL = 3 - ln(4).
  CHECK(std::abs(kl_to_prior(stats, {0.7, -0.2}) - 1.6137056388801094) < 1e-12);

  GaussianStats standard;
  standard.mu_hat = {0.3, -1.1};
  standard.logvar_hat = {0.0, 0.0};
  CHECK(kl_to_prior(standard, {0.3, -1.1}) == 0.0);
}

TEST_CASE("kl to prior is nonnegative") {
  RandomStream rng(43, "kl-positive");
  for (int trial = 0; trial < 100; ++trial) {
    GaussianStats stats;
    stats.mu_hat = rng.draw_normal(3);
    stats.logvar_hat = rng.draw_normal(3);
    const Vec64 prior = rng.draw_normal(3);
    CHECK(kl_to_prior(stats, prior) >= 0.0);
  }
}

TEST_CASE("kl backward matches finite differences") {
  RandomStream rng(47, "kl-grad");
  GaussianStats stats;
  stats.mu_hat = rng.draw_normal(3);
  stats.logvar_hat = rng.draw_normal(3);
  const Vec64 prior = rng.draw_normal(3);
  Vec64 gm(3, 0.0), gl(3, 0.0);
  kl_backward(stats, prior, 1.0, gm, gl);
  const double h = 1e-6;
  const auto fd = [&](double& slot) {
    const double x0 = slot;
    slot = x0 + h;
    const double up = kl_to_prior(stats, prior);
    slot = x0 - h;
    const double down = kl_to_prior(stats, prior);
    slot = x0;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(gm[i] - fd(stats.mu_hat[i])) < 1e-8);
    CHECK(std::abs(gl[i] - fd(stats.logvar_hat[i])) < 1e-8);
  }
}

TEST_CASE("incremental loss with zero statistics doubles the cross entropy") {
  const PrototypeClassifier clf = axes_classifier();
  RandomStream rng(53, "incr-loss");
  const Vec64 f = rng.draw_normal(3);
  GaussianStats stats;
  stats.mu_hat.assign(3, 0.0);
  stats.logvar_hat.assign(3, 0.0);
  const Vec64 prior = rng.draw_normal(3);
  const Vec64 perturbed = perturb(f, stats);  // identity under zero stats

  Hyperparams hp;
  hp.alpha = 0.0;
  const LossValue loss = incremental_loss(f, perturbed, clf, 0, stats, prior, hp);
  CHECK(loss.components.at("ce_clean") ==
        doctest::Approx(loss.components.at("ce_perturbed")));
  CHECK(loss.value == doctest::Approx(2.0 * loss.components.at("ce_clean")));
  CHECK(loss.components.at("ce_clean") ==
        doctest::Approx(ce_cosine_loss(classify(clf, f), 0)));

  // With alpha > 0 the prior term joins in: KL = sum(prior^2) / 2 here.
  hp.alpha = 0.5;
  const LossValue with_kl =
      incremental_loss(f, perturbed, clf, 0, stats, prior, hp);
  double expected_kl = 0.0;
  for (double v : prior) expected_kl += 0.5 * v * v;
  CHECK(with_kl.components.at("kl") == doctest::Approx(expected_kl));
  CHECK(with_kl.value == doctest::Approx(loss.value + 0.5 * expected_kl));

  // The KL component scales exactly linearly in alpha.
  hp.alpha = 1.0;
  const LossValue doubled =
      incremental_loss(f, perturbed, clf, 0, stats, prior, hp);
  CHECK(doubled.value - loss.value ==
        doctest::Approx(2.0 * (with_kl.value - loss.value)));

  // A genuinely perturbed input changes only the perturbed component.
  GaussianStats wide;
  wide.mu_hat = {0.4, -0.2, 0.1};
  wide.logvar_hat = {0.3, -0.5, 0.2};
  const LossValue shifted = incremental_loss(f, perturb(f, wide), clf, 0, wide,
                                             prior, hp);
  CHECK(shifted.components.at("ce_clean") ==
        doctest::Approx(loss.components.at("ce_clean")));
  CHECK(shifted.components.at("ce_perturbed") ==
        doctest::Approx(
            ce_cosine_loss(classify(clf, perturb(f, wide)), 0)));
}
