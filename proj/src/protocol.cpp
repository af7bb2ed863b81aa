#include "fscil/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "fscil/objectives.hpp"
#include "fscil/random.hpp"

namespace fscil {

const char* to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kPrototype: return "prototype";
    case Strategy::kFinetuneCe: return "finetune_ce";
    case Strategy::kSpl: return "spl";
  }
  return "unknown";
}

bool parse_strategy(const std::string& text, Strategy& out) {
  if (text == "prototype") out = Strategy::kPrototype;
  else if (text == "finetune_ce") out = Strategy::kFinetuneCe;
  else if (text == "spl") out = Strategy::kSpl;
  else return false;
  return true;
}

namespace {

void apply_sgd(DenseLayer& layer, const LayerGrads& grads, double lr) {
  for (std::size_t i = 0; i < layer.weights.values.size(); ++i) {
    layer.weights.values[i] -= lr * grads.weights.values[i];
  }
  for (std::size_t i = 0; i < layer.bias.size(); ++i) {
    layer.bias[i] -= lr * grads.bias[i];
  }
}

void apply_sgd(MlpExtractor& extractor, const std::vector<LayerGrads>& grads,
               double lr) {
  for (std::size_t li = 0; li < extractor.layers.size(); ++li) {
    apply_sgd(extractor.layers[li], grads[li], lr);
  }
}

void apply_sgd(StatisticsHead& head, const StatsHeadGrads& grads, double lr) {
  apply_sgd(head.mu, grads.mu, lr);
  apply_sgd(head.logvar, grads.logvar, lr);
}

// Updates prototypes with storage index >= first_trainable only.
void apply_sgd_prototypes(PrototypeClassifier& classifier,
                          const std::vector<Vec64>& grads,
                          std::size_t first_trainable, double lr) {
  for (std::size_t c = first_trainable; c < classifier.prototypes.size(); ++c) {
    for (std::size_t i = 0; i < classifier.prototypes[c].size(); ++i) {
      classifier.prototypes[c][i] -= lr * grads[c][i];
    }
  }
}

std::map<std::uint32_t, std::size_t> storage_index(
    const PrototypeClassifier& classifier) {
  std::map<std::uint32_t, std::size_t> index;
  for (std::size_t c = 0; c < classifier.class_ids.size(); ++c) {
    index[classifier.class_ids[c]] = c;
  }
  return index;
}

}  // namespace

TrainedState train_base(const SessionDataset& base_session,
                        const TrainConfig& config) {
  if (base_session.train.empty()) {
    throw std::invalid_argument("train_base: empty training set");
  }
  if (config.batch_size == 0) {
    throw std::invalid_argument("train_base: batch_size must be >= 1");
  }
  const std::size_t input_dim = base_session.train.front().input.size();
  const double gamma = config.hyperparams.gamma;

  TrainedState state;
  {
    RandomStream rng(config.seed, "extractor-init");
    state.extractor =
        make_extractor(input_dim, config.hidden_dims, config.feature_dim, rng);
  }
  {
    RandomStream rng(config.seed, "head-init");
    state.head = make_statistics_head(config.feature_dim, rng);
  }
  {
    RandomStream rng(config.seed, "prototype-init");
    for (std::uint32_t cls : base_session.new_class_ids) {
      state.classifier.prototypes.push_back(rng.draw_normal(config.feature_dim));
      state.classifier.class_ids.push_back(cls);
    }
  }
  state.base_class_ids = base_session.new_class_ids;

  const auto index = storage_index(state.classifier);
  std::vector<std::size_t> order(base_session.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream shuffle_rng(config.seed, "shuffle");
  StatisticsHead* head = gamma != 0.0 ? &state.head : nullptr;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end =
          std::min(start + config.batch_size, order.size());
      std::vector<Vec64> inputs;
      std::vector<std::size_t> targets;
      inputs.reserve(end - start);
      targets.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const LabeledSample& sample = base_session.train[order[k]];
        inputs.push_back(sample.input);
        targets.push_back(index.at(sample.label));
      }
      BaseTape tape;
      base_objective(state.extractor, head, state.classifier, inputs, targets,
                     gamma, &tape);
      const GradientBundle bundle =
          base_objective_backward(state.extractor, head, state.classifier, tape);
      apply_sgd(state.extractor, bundle.extractor, config.learning_rate);
      apply_sgd_prototypes(state.classifier, bundle.prototypes, 0,
                           config.learning_rate);
      if (bundle.has_head) {
        apply_sgd(state.head, bundle.head, config.learning_rate);
      }
    }
  }
  return state;
}

void incremental_update(TrainedState& state, const SessionDataset& session,
                        const TrainConfig& config) {
  if (session.new_class_ids.empty() || session.train.empty()) {
    throw std::invalid_argument("incremental_update: empty session");
  }
  const auto enrolled = storage_index(state.classifier);
  for (std::uint32_t cls : session.new_class_ids) {
    if (enrolled.count(cls) != 0) {
      throw std::invalid_argument("incremental_update: class " +
                                  std::to_string(cls) + " already enrolled");
    }
  }
  const std::size_t old_count = state.classifier.num_classes();

  // Frozen-extractor features of the session's shots, in session order.
  std::vector<Vec64> features;
  features.reserve(session.train.size());
  for (const LabeledSample& sample : session.train) {
    features.push_back(extract_features(state.extractor, sample.input));
  }

  // Class-mean prototype per new class, ascending class id.
  std::map<std::uint32_t, std::vector<Vec64>> by_class;
  for (std::size_t i = 0; i < session.train.size(); ++i) {
    by_class[session.train[i].label].push_back(features[i]);
  }
  for (std::uint32_t cls : session.new_class_ids) {
    const auto it = by_class.find(cls);
    if (it == by_class.end()) {
      throw std::invalid_argument("incremental_update: class " +
                                  std::to_string(cls) + " has no shots");
    }
    state.classifier.prototypes.push_back(compute_prototype(it->second));
    state.classifier.class_ids.push_back(cls);
  }
  if (config.strategy == Strategy::kPrototype) return;

  const auto index = storage_index(state.classifier);
  std::vector<std::size_t> targets;
  targets.reserve(session.train.size());
  for (const LabeledSample& sample : session.train) {
    targets.push_back(index.at(sample.label));
  }
  const double lr = config.incremental_learning_rate;

  if (config.strategy == Strategy::kFinetuneCe) {
    const double inv_batch = 1.0 / static_cast<double>(features.size());
    for (std::size_t epoch = 0; epoch < config.incremental_epochs; ++epoch) {
      std::vector<Vec64> proto_grads(state.classifier.num_classes());
      for (std::size_t c = 0; c < proto_grads.size(); ++c) {
        proto_grads[c].assign(config.feature_dim, 0.0);
      }
      for (std::size_t b = 0; b < features.size(); ++b) {
        const Vec64 sims = class_cosines(state.classifier, features[b]);
        const Vec64 grad_sims = ce_grad_wrt_similarities(sims, targets[b]);
        Vec64 grad_f(features[b].size(), 0.0);
        for (std::size_t c = 0; c < proto_grads.size(); ++c) {
          const double g = grad_sims[c] * inv_batch;
          if (g == 0.0) continue;
          cosine_backward(features[b], state.classifier.prototypes[c], g,
                          grad_f, proto_grads[c]);
        }
      }
      apply_sgd_prototypes(state.classifier, proto_grads, old_count, lr);
    }
    return;
  }

  // Perturbation learning: fresh zero head, full-batch updates of the head
  // and the new prototypes. Each sample's prior mean is the similarity-
  // weighted blend of the other classes' prototypes, recomputed every epoch
  // and held constant within the step.
  StatisticsHead head = make_zero_statistics_head(config.feature_dim);
  for (std::size_t epoch = 0; epoch < config.incremental_epochs; ++epoch) {
    std::vector<Vec64> priors;
    priors.reserve(features.size());
    for (std::size_t b = 0; b < features.size(); ++b) {
      const SimilarityWeights weights =
          similarity_scores(features[b], state.classifier, targets[b]);
      priors.push_back(prior_mean(weights, state.classifier));
    }
    IncrementalTape tape;
    incremental_objective(head, state.classifier, features, targets, priors,
                          config.hyperparams.alpha, &tape);
    GradientBundle bundle =
        incremental_objective_backward(head, state.classifier, tape);
    apply_sgd_prototypes(state.classifier, bundle.prototypes, old_count, lr);
    apply_sgd(head, bundle.head, lr);
  }
}

double mean_abs_logvar(const MlpExtractor& extractor, const StatisticsHead& head,
                       const std::vector<LabeledSample>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("mean_abs_logvar: empty sample set");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (const LabeledSample& sample : samples) {
    const Vec64 f = extract_features(extractor, sample.input);
    const GaussianStats stats = predict_statistics(head, f, nullptr);
    for (double lv : stats.logvar_hat) {
      acc += std::abs(lv);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

namespace {

std::vector<SessionReport> run_incrementals(
    TrainedState& state, const std::vector<SessionDataset>& sessions,
    const TrainConfig& config) {
  std::vector<LabeledSample> test_union = sessions.front().test;
  std::vector<SessionReport> reports;
  reports.push_back(evaluate(state.extractor, state.classifier, test_union,
                             state.base_class_ids, 0));
  for (std::size_t t = 1; t < sessions.size(); ++t) {
    incremental_update(state, sessions[t], config);
    test_union.insert(test_union.end(), sessions[t].test.begin(),
                      sessions[t].test.end());
    reports.push_back(evaluate(state.extractor, state.classifier, test_union,
                               state.base_class_ids, t));
  }
  return reports;
}

}  // namespace

ExperimentResult run_experiment(const SyntheticDataset& data,
                                const SessionPlan& plan,
                                const TrainConfig& config) {
  const std::vector<SessionDataset> sessions = split_sessions(data, plan);
  ExperimentResult result;
  result.state = train_base(sessions.front(), config);
  result.reports = run_incrementals(result.state, sessions, config);
  result.summary = summarize(result.reports);
  return result;
}

std::vector<NamedResult> compare_methods(const SyntheticDataset& data,
                                         const SessionPlan& plan,
                                         const TrainConfig& config) {
  const std::vector<SessionDataset> sessions = split_sessions(data, plan);
  std::map<double, TrainedState> base_cache;
  const auto base_for = [&](double gamma) -> const TrainedState& {
    auto it = base_cache.find(gamma);
    if (it == base_cache.end()) {
      TrainConfig base_config = config;
      base_config.hyperparams.gamma = gamma;
      it = base_cache.emplace(gamma, train_base(sessions.front(), base_config))
               .first;
    }
    return it->second;
  };

  struct MethodSpec {
    const char* name;
    double gamma;
    Strategy strategy;
  };
  const double gamma = config.hyperparams.gamma;
  const MethodSpec specs[] = {
      {"ce_prototype", 0.0, Strategy::kPrototype},
      {"ccl_prototype", gamma, Strategy::kPrototype},
      {"ccl_finetune", gamma, Strategy::kFinetuneCe},
      {"ccl_spl", gamma, Strategy::kSpl},
  };

  std::vector<NamedResult> results;
  for (const MethodSpec& spec : specs) {
    TrainConfig method_config = config;
    method_config.hyperparams.gamma = spec.gamma;
    method_config.strategy = spec.strategy;
    NamedResult named;
    named.name = spec.name;
    named.result.state = base_for(spec.gamma);
    named.result.reports =
        run_incrementals(named.result.state, sessions, method_config);
    named.result.summary = summarize(named.result.reports);
    results.push_back(std::move(named));
  }
  return results;
}

std::vector<SweepCell> sweep_hyperparams(const SyntheticDataset& data,
                                         const SessionPlan& plan,
                                         const TrainConfig& config,
                                         const std::vector<double>& gammas,
                                         const std::vector<double>& alphas) {
  if (gammas.empty() || alphas.empty()) {
    throw std::invalid_argument("sweep_hyperparams: empty grid");
  }
  const std::vector<SessionDataset> sessions = split_sessions(data, plan);
  std::vector<SweepCell> cells;
  for (double gamma : gammas) {
    TrainConfig base_config = config;
    base_config.hyperparams.gamma = gamma;
    const TrainedState base_state = train_base(sessions.front(), base_config);
    for (double alpha : alphas) {
      TrainConfig cell_config = base_config;
      cell_config.hyperparams.alpha = alpha;
      TrainedState state = base_state;
      const std::vector<SessionReport> reports =
          run_incrementals(state, sessions, cell_config);
      cells.push_back({gamma, alpha, reports.back().acc_overall});
    }
  }
  return cells;
}

}  // namespace fscil
