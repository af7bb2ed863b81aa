#pragma once

#include <cstddef>
#include <vector>

#include "fscil/losses.hpp"
#include "fscil/model.hpp"

namespace fscil {

// Forward tape for base_objective; holds everything backward needs.
struct BaseTape {
  std::vector<Vec64> inputs;
  std::vector<std::size_t> targets;
  double gamma = 0.0;
  bool has_head = false;
  std::vector<MlpCache> mlp;
  std::vector<Vec64> features;
  std::vector<Vec64> similarities;
  std::vector<StatsCache> stats_cache;
  std::vector<GaussianStats> stats;
};

// Base-session objective over a raw-input batch: mean cross entropy through
// extractor and classifier, plus gamma times the variance-calibration
// penalty on the head's log-variance outputs. Pass head == nullptr (or
// gamma == 0 with no head) for the plain cross-entropy objective.
LossValue base_objective(const MlpExtractor& extractor, const StatisticsHead* head,
                         const PrototypeClassifier& classifier,
                         const std::vector<Vec64>& inputs,
                         const std::vector<std::size_t>& targets, double gamma,
                         BaseTape* tape);

// Gradients of base_objective w.r.t. extractor, prototypes, and (if used)
// head parameters. Requires the tape from the matching forward call.
GradientBundle base_objective_backward(const MlpExtractor& extractor,
                                       const StatisticsHead* head,
                                       const PrototypeClassifier& classifier,
                                       const BaseTape& tape);

// Variance-calibration penalty alone, through extractor and head. The
// classifier plays no part. Used to exercise that path in isolation.
LossValue ccl_objective(const MlpExtractor& extractor, const StatisticsHead& head,
                        const std::vector<Vec64>& inputs, BaseTape* tape);

GradientBundle ccl_objective_backward(const MlpExtractor& extractor,
                                      const StatisticsHead& head,
                                      const BaseTape& tape);

// Forward tape for incremental_objective.
struct IncrementalTape {
  std::vector<Vec64> features;
  std::vector<std::size_t> targets;
  std::vector<Vec64> prior_means;
  double alpha = 0.0;
  std::vector<StatsCache> stats_cache;
  std::vector<GaussianStats> stats;
  std::vector<Vec64> perturbed;
  std::vector<Vec64> sims_clean;
  std::vector<Vec64> sims_perturbed;
};

// Incremental-session objective over fixed feature vectors (the extractor
// is frozen then): mean cross entropy on the clean features, mean cross
// entropy on their deterministic perturbations, and alpha times the mean KL
// to the per-sample prior. Prior means enter as constants; gradients flow
// to all prototypes and to the head (callers mask prototypes they freeze).
LossValue incremental_objective(const StatisticsHead& head,
                                const PrototypeClassifier& classifier,
                                const std::vector<Vec64>& features,
                                const std::vector<std::size_t>& targets,
                                const std::vector<Vec64>& prior_means, double alpha,
                                IncrementalTape* tape);

GradientBundle incremental_objective_backward(const StatisticsHead& head,
                                              const PrototypeClassifier& classifier,
                                              const IncrementalTape& tape);

}  // namespace fscil
