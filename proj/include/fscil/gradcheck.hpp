#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace fscil {

// Objective families whose hand-written backward passes are validated
// against central finite differences.
enum class LossFamily {
  kCrossEntropy,         // extractor + prototypes
  kVarianceCalibration,  // extractor + statistics head
  kBaseComposite,        // extractor + prototypes + head, gamma > 0
  kPriorKl,              // statistics head alone
  kIncremental,          // prototypes + head on frozen features
};

const char* to_string(LossFamily family);
extern const LossFamily kAllLossFamilies[5];

struct GradCheckReport {
  LossFamily family = LossFamily::kCrossEntropy;
  std::size_t cases_run = 0;
  std::size_t cases_resampled = 0;  // configs rejected as ill-conditioned
  double max_rel_error = 0.0;
  bool passed = false;
};

// Finite-difference step and acceptance threshold for the analytic-versus-
// numeric comparison. Relative error uses max(|analytic|, |numeric|, 1e-8)
// as the denominator. Configurations where the central difference cannot
// measure the true derivative are resampled: a relu preactivation or a
// log-variance clamp boundary within kKinkGuard of its kink (the probe
// would straddle the kink), a vector entering a cosine with near-zero norm
// (the probe would cross the floored-denominator branch), or a relu layer
// with fewer than two live units (upstream parameters then only rescale
// the features, which the cosine ignores, leaving one-ulp probe noise).
inline constexpr double kFiniteDiffStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kKinkGuard = 1e-6;

// Runs `cases` randomized configurations of the given family, comparing the
// analytic gradient of every parameter against central differences. With
// inject_corruption set, one analytic entry is deliberately corrupted per
// case; the run must then fail, which exercises the checker itself.
GradCheckReport grad_check(LossFamily family, std::size_t cases,
                           std::uint64_t seed, bool inject_corruption = false);

}  // namespace fscil
