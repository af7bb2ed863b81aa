#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fscil/data.hpp"
#include "fscil/losses.hpp"
#include "fscil/metrics.hpp"
#include "fscil/model.hpp"

namespace fscil {

// How an incremental session updates the model. All three first append a
// class-mean prototype per new class; the extractor is frozen throughout.
enum class Strategy {
  kPrototype,   // class-mean prototypes only
  kFinetuneCe,  // cross-entropy finetuning of the new prototypes
  kSpl,         // perturbation learning with a fresh statistics head
};

const char* to_string(Strategy strategy);
bool parse_strategy(const std::string& text, Strategy& out);

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  std::size_t incremental_epochs = 30;
  double incremental_learning_rate = 0.01;
  Hyperparams hyperparams;
  Strategy strategy = Strategy::kSpl;
  std::vector<std::size_t> hidden_dims = {32, 32};
  std::size_t feature_dim = 8;
  std::uint64_t seed = 1;
};

struct TrainedState {
  MlpExtractor extractor;
  PrototypeClassifier classifier;
  // Base-session statistics head. Random-initialized either way; trained by
  // the variance-calibration penalty when gamma > 0, untouched when
  // gamma == 0. Incremental sessions never reuse it: the perturbation
  // strategy trains a fresh zero-initialized head per session and drops it.
  StatisticsHead head;
  std::vector<std::uint32_t> base_class_ids;
};

// Trains extractor, prototype classifier, and statistics head on the base
// session with mini-batch SGD on mean cross entropy plus gamma times the
// variance-calibration penalty. gamma == 0 reduces to the plain
// cross-entropy pipeline, bit for bit.
TrainedState train_base(const SessionDataset& base_session,
                        const TrainConfig& config);

// Applies one incremental session to the state per the configured strategy.
// Appends exactly session.new_class_ids.size() prototypes; previously
// learned parameters other than the new prototypes stay frozen.
void incremental_update(TrainedState& state, const SessionDataset& session,
                        const TrainConfig& config);

// Mean absolute predicted log-variance of the head over a sample set;
// diagnostic for how far the variance calibration has pulled the head.
double mean_abs_logvar(const MlpExtractor& extractor, const StatisticsHead& head,
                       const std::vector<LabeledSample>& samples);

struct ExperimentResult {
  std::vector<SessionReport> reports;  // one per session, in order
  ExperimentSummary summary;
  TrainedState state;  // after the final session
};

// Full protocol: split, base training, incremental sessions, evaluating
// after every session on the union of all test splits seen so far.
ExperimentResult run_experiment(const SyntheticDataset& data,
                                const SessionPlan& plan,
                                const TrainConfig& config);

struct NamedResult {
  std::string name;
  ExperimentResult result;
};

// Reference comparison: the plain cross-entropy base with mean prototypes,
// then the calibrated base under each incremental strategy. Base training
// is shared between rows with the same gamma.
std::vector<NamedResult> compare_methods(const SyntheticDataset& data,
                                         const SessionPlan& plan,
                                         const TrainConfig& config);

struct SweepCell {
  double gamma = 0.0;
  double alpha = 0.0;
  double final_overall = 0.0;  // accuracy after the last session
};

// Grid run over hyperparameter settings with the configured strategy. Base
// training is reused across alphas for a fixed gamma.
std::vector<SweepCell> sweep_hyperparams(const SyntheticDataset& data,
                                         const SessionPlan& plan,
                                         const TrainConfig& config,
                                         const std::vector<double>& gammas,
                                         const std::vector<double>& alphas);

}  // namespace fscil
