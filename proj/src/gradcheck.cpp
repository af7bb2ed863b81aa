#include "fscil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fscil/losses.hpp"
#include "fscil/mathcore.hpp"
#include "fscil/model.hpp"
#include "fscil/objectives.hpp"
#include "fscil/random.hpp"

namespace fscil {

const LossFamily kAllLossFamilies[5] = {
    LossFamily::kCrossEntropy, LossFamily::kVarianceCalibration,
    LossFamily::kBaseComposite, LossFamily::kPriorKl, LossFamily::kIncremental};

const char* to_string(LossFamily family) {
  switch (family) {
    case LossFamily::kCrossEntropy: return "cross_entropy";
    case LossFamily::kVarianceCalibration: return "variance_calibration";
    case LossFamily::kBaseComposite: return "base_composite";
    case LossFamily::kPriorKl: return "prior_kl";
    case LossFamily::kIncremental: return "incremental";
  }
  return "unknown";
}

namespace {

// Mutable view over every trainable scalar of a model configuration, in a
// fixed order mirrored by flatten_bundle below.
class ParamView {
 public:
  void add(Mat64& m) {
    for (double& v : m.values) slots_.push_back(&v);
  }
  void add(Vec64& v) {
    for (double& x : v) slots_.push_back(&x);
  }
  void add_layer(DenseLayer& layer) {
    add(layer.weights);
    add(layer.bias);
  }
  std::size_t size() const { return slots_.size(); }
  double get(std::size_t i) const { return *slots_[i]; }
  void set(std::size_t i, double v) { *slots_[i] = v; }

 private:
  std::vector<double*> slots_;
};

Vec64 flatten_bundle(const GradientBundle& bundle, bool with_extractor,
                     bool with_prototypes, bool with_head) {
  Vec64 flat;
  if (with_extractor) {
    for (const LayerGrads& lg : bundle.extractor) {
      flat.insert(flat.end(), lg.weights.values.begin(), lg.weights.values.end());
      flat.insert(flat.end(), lg.bias.begin(), lg.bias.end());
    }
  }
  if (with_prototypes) {
    for (const Vec64& p : bundle.prototypes) {
      flat.insert(flat.end(), p.begin(), p.end());
    }
  }
  if (with_head) {
    const auto append_layer = [&flat](const LayerGrads& lg) {
      flat.insert(flat.end(), lg.weights.values.begin(), lg.weights.values.end());
      flat.insert(flat.end(), lg.bias.begin(), lg.bias.end());
    };
    append_layer(bundle.head.mu);
    append_layer(bundle.head.logvar);
  }
  return flat;
}

// One randomized configuration: models plus the batch it is evaluated on.
struct CheckConfig {
  MlpExtractor extractor;
  StatisticsHead head;
  PrototypeClassifier classifier;
  std::vector<Vec64> inputs;     // raw inputs, or frozen features
  std::vector<std::size_t> targets;
  std::vector<Vec64> prior_means;
};

constexpr std::size_t kInputDim = 6;
constexpr std::size_t kFeatureDim = 5;
constexpr std::size_t kNumClasses = 4;
constexpr std::size_t kBatch = 3;

CheckConfig make_config(LossFamily family, RandomStream& rng) {
  CheckConfig cfg;
  const bool raw_inputs = family == LossFamily::kCrossEntropy ||
                          family == LossFamily::kVarianceCalibration ||
                          family == LossFamily::kBaseComposite;
  if (raw_inputs) {
    cfg.extractor = make_extractor(kInputDim, {8, 6}, kFeatureDim, rng);
  }
  cfg.head = make_statistics_head(kFeatureDim, rng);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    cfg.classifier.prototypes.push_back(rng.draw_normal(kFeatureDim));
    cfg.classifier.class_ids.push_back(static_cast<std::uint32_t>(c));
  }
  const std::size_t in_dim = raw_inputs ? kInputDim : kFeatureDim;
  for (std::size_t b = 0; b < kBatch; ++b) {
    cfg.inputs.push_back(rng.draw_normal(in_dim));
    cfg.targets.push_back(rng.next_index(kNumClasses));
    cfg.prior_means.push_back(rng.draw_normal(kFeatureDim));
  }
  return cfg;
}

double clamp_margin(const StatsCache& cache) {
  double margin = std::numeric_limits<double>::infinity();
  for (double raw : cache.logvar_raw) {
    margin = std::min(margin, std::min(std::abs(raw - kLogVarMin),
                                       std::abs(kLogVarMax - raw)));
  }
  return margin;
}

// The cosine denominator is floored, so vectors with near-zero norm sit on
// a branch of the function where a probe step of kFiniteDiffStep changes
// the cosine by O(1). Configurations whose classified vectors (or
// prototypes) have norms on that scale are resampled; the guard must
// dominate the probe step by a wide margin.
constexpr double kNormGuard = 1e-3;

double min_norm(const std::vector<Vec64>& vectors) {
  double m = std::numeric_limits<double>::infinity();
  for (const Vec64& v : vectors) m = std::min(m, norm(v));
  return m;
}

// With zero-initialised biases, a relu layer with fewer than two live units
// leaves every upstream parameter only rescaling that sample's features.
// The cosine ignores scale, so such slots have exact-zero derivatives that
// a finite difference can observe only as one-ulp noise; demand two live
// units per relu layer so every parameter direction stays measurable.
bool relu_paths_measurable(const std::vector<MlpCache>& caches) {
  for (const MlpCache& cache : caches) {
    for (std::size_t l = 0; l + 1 < cache.layers.size(); ++l) {
      int alive = 0;
      for (double p : cache.layers[l].preactivation) {
        if (p > 0.0) ++alive;
      }
      if (alive < 2) return false;
    }
  }
  return true;
}

// Evaluation + analytic gradient + conditioning probe for one family. A
// configuration is well conditioned when every relu preactivation and
// log-variance clamp input sits at least kKinkGuard from its kink and
// every vector entering a cosine has norm above kNormGuard, measured at
// the unperturbed parameters.
struct FamilyOps {
  std::function<double()> value;
  std::function<Vec64()> analytic;
  std::function<bool()> well_conditioned;
};

FamilyOps bind_family(LossFamily family, CheckConfig& cfg,
                      const Hyperparams& hp) {
  FamilyOps ops;
  switch (family) {
    case LossFamily::kCrossEntropy: {
      ops.value = [&cfg] {
        return base_objective(cfg.extractor, nullptr, cfg.classifier, cfg.inputs,
                              cfg.targets, 0.0, nullptr)
            .value;
      };
      ops.analytic = [&cfg] {
        BaseTape tape;
        base_objective(cfg.extractor, nullptr, cfg.classifier, cfg.inputs,
                       cfg.targets, 0.0, &tape);
        return flatten_bundle(
            base_objective_backward(cfg.extractor, nullptr, cfg.classifier, tape),
            true, true, false);
      };
      ops.well_conditioned = [&cfg] {
        BaseTape tape;
        base_objective(cfg.extractor, nullptr, cfg.classifier, cfg.inputs,
                       cfg.targets, 0.0, &tape);
        double margin = std::numeric_limits<double>::infinity();
        for (const MlpCache& c : tape.mlp) {
          margin = std::min(margin, c.min_abs_relu_preact);
        }
        return margin > kKinkGuard && relu_paths_measurable(tape.mlp) &&
               min_norm(tape.features) > kNormGuard &&
               min_norm(cfg.classifier.prototypes) > kNormGuard;
      };
      break;
    }
    case LossFamily::kVarianceCalibration: {
      ops.value = [&cfg] {
        return ccl_objective(cfg.extractor, cfg.head, cfg.inputs, nullptr).value;
      };
      ops.analytic = [&cfg] {
        BaseTape tape;
        ccl_objective(cfg.extractor, cfg.head, cfg.inputs, &tape);
        return flatten_bundle(
            ccl_objective_backward(cfg.extractor, cfg.head, tape), true, false,
            true);
      };
      ops.well_conditioned = [&cfg] {
        BaseTape tape;
        ccl_objective(cfg.extractor, cfg.head, cfg.inputs, &tape);
        double margin = std::numeric_limits<double>::infinity();
        for (const MlpCache& c : tape.mlp) {
          margin = std::min(margin, c.min_abs_relu_preact);
        }
        for (const StatsCache& c : tape.stats_cache) {
          margin = std::min(margin, clamp_margin(c));
        }
        return margin > kKinkGuard;
      };
      break;
    }
    case LossFamily::kBaseComposite: {
      const double gamma = hp.gamma;
      ops.value = [&cfg, gamma] {
        return base_objective(cfg.extractor, &cfg.head, cfg.classifier,
                              cfg.inputs, cfg.targets, gamma, nullptr)
            .value;
      };
      ops.analytic = [&cfg, gamma] {
        BaseTape tape;
        base_objective(cfg.extractor, &cfg.head, cfg.classifier, cfg.inputs,
                       cfg.targets, gamma, &tape);
        return flatten_bundle(base_objective_backward(cfg.extractor, &cfg.head,
                                                      cfg.classifier, tape),
                              true, true, true);
      };
      ops.well_conditioned = [&cfg, gamma] {
        BaseTape tape;
        base_objective(cfg.extractor, &cfg.head, cfg.classifier, cfg.inputs,
                       cfg.targets, gamma, &tape);
        double margin = std::numeric_limits<double>::infinity();
        for (const MlpCache& c : tape.mlp) {
          margin = std::min(margin, c.min_abs_relu_preact);
        }
        for (const StatsCache& c : tape.stats_cache) {
          margin = std::min(margin, clamp_margin(c));
        }
        return margin > kKinkGuard && relu_paths_measurable(tape.mlp) &&
               min_norm(tape.features) > kNormGuard &&
               min_norm(cfg.classifier.prototypes) > kNormGuard;
      };
      break;
    }
    case LossFamily::kPriorKl: {
      ops.value = [&cfg] {
        double acc = 0.0;
        for (std::size_t b = 0; b < cfg.inputs.size(); ++b) {
          const GaussianStats stats =
              predict_statistics(cfg.head, cfg.inputs[b], nullptr);
          acc += kl_to_prior(stats, cfg.prior_means[b]);
        }
        return acc / static_cast<double>(cfg.inputs.size());
      };
      ops.analytic = [&cfg] {
        GradientBundle bundle;
        bundle.head = zero_grads_like(cfg.head);
        bundle.has_head = true;
        const double inv = 1.0 / static_cast<double>(cfg.inputs.size());
        for (std::size_t b = 0; b < cfg.inputs.size(); ++b) {
          StatsCache cache;
          const GaussianStats stats =
              predict_statistics(cfg.head, cfg.inputs[b], &cache);
          Vec64 grad_mu(kFeatureDim, 0.0);
          Vec64 grad_logvar(kFeatureDim, 0.0);
          kl_backward(stats, cfg.prior_means[b], inv, grad_mu, grad_logvar);
          Vec64 grad_features(kFeatureDim, 0.0);
          statistics_backward(cfg.head, cache, grad_mu, grad_logvar, bundle.head,
                              grad_features);
        }
        return flatten_bundle(bundle, false, false, true);
      };
      ops.well_conditioned = [&cfg] {
        double margin = std::numeric_limits<double>::infinity();
        for (const Vec64& x : cfg.inputs) {
          StatsCache cache;
          predict_statistics(cfg.head, x, &cache);
          margin = std::min(margin, clamp_margin(cache));
        }
        return margin > kKinkGuard;
      };
      break;
    }
    case LossFamily::kIncremental: {
      const double alpha = hp.alpha;
      ops.value = [&cfg, alpha] {
        return incremental_objective(cfg.head, cfg.classifier, cfg.inputs,
                                     cfg.targets, cfg.prior_means, alpha, nullptr)
            .value;
      };
      ops.analytic = [&cfg, alpha] {
        IncrementalTape tape;
        incremental_objective(cfg.head, cfg.classifier, cfg.inputs, cfg.targets,
                              cfg.prior_means, alpha, &tape);
        return flatten_bundle(
            incremental_objective_backward(cfg.head, cfg.classifier, tape),
            false, true, true);
      };
      ops.well_conditioned = [&cfg, alpha] {
        IncrementalTape tape;
        incremental_objective(cfg.head, cfg.classifier, cfg.inputs, cfg.targets,
                              cfg.prior_means, alpha, &tape);
        double margin = std::numeric_limits<double>::infinity();
        for (const StatsCache& c : tape.stats_cache) {
          margin = std::min(margin, clamp_margin(c));
        }
        return margin > kKinkGuard && min_norm(cfg.inputs) > kNormGuard &&
               min_norm(tape.perturbed) > kNormGuard &&
               min_norm(cfg.classifier.prototypes) > kNormGuard;
      };
      break;
    }
  }
  return ops;
}

ParamView bind_params(LossFamily family, CheckConfig& cfg) {
  ParamView view;
  const bool with_extractor = family == LossFamily::kCrossEntropy ||
                              family == LossFamily::kVarianceCalibration ||
                              family == LossFamily::kBaseComposite;
  const bool with_prototypes = family == LossFamily::kCrossEntropy ||
                               family == LossFamily::kBaseComposite ||
                               family == LossFamily::kIncremental;
  const bool with_head = family != LossFamily::kCrossEntropy;
  if (with_extractor) {
    for (DenseLayer& layer : cfg.extractor.layers) view.add_layer(layer);
  }
  if (with_prototypes) {
    for (Vec64& p : cfg.classifier.prototypes) view.add(p);
  }
  if (with_head) {
    view.add_layer(cfg.head.mu);
    view.add_layer(cfg.head.logvar);
  }
  return view;
}

std::string case_label(LossFamily family, std::size_t case_idx,
                       std::size_t attempt) {
  return std::string("gradcheck/") + to_string(family) + "/" +
         std::to_string(case_idx) + "/" + std::to_string(attempt);
}

}  // namespace

GradCheckReport grad_check(LossFamily family, std::size_t cases,
                           std::uint64_t seed, bool inject_corruption) {
  GradCheckReport report;
  report.family = family;
  const Hyperparams hp{0.7, 0.9};  // O(1) weights so every term is exercised
  for (std::size_t case_idx = 0; case_idx < cases; ++case_idx) {
    CheckConfig cfg;
    FamilyOps ops;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > 100) {
        throw std::runtime_error("grad_check: could not sample a clean config");
      }
      RandomStream rng(seed, case_label(family, case_idx, attempt));
      cfg = make_config(family, rng);
      ops = bind_family(family, cfg, hp);
      if (ops.well_conditioned()) break;
      ++report.cases_resampled;
    }
    Vec64 analytic = ops.analytic();
    if (inject_corruption) {
      double& g = analytic[analytic.size() / 2];
      g = g * 1.02 + 1e-3;
    }
    ParamView params = bind_params(family, cfg);
    if (params.size() != analytic.size()) {
      throw std::logic_error("grad_check: parameter/gradient count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double original = params.get(i);
      params.set(i, original + kFiniteDiffStep);
      const double up = ops.value();
      params.set(i, original - kFiniteDiffStep);
      const double down = ops.value();
      params.set(i, original);
      const double numeric = (up - down) / (2.0 * kFiniteDiffStep);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    ++report.cases_run;
  }
  report.passed = report.max_rel_error < kGradCheckTolerance;
  return report;
}

}  // namespace fscil
