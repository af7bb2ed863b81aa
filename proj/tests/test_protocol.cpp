#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fscil/checkpoint.hpp"
#include "fscil/objectives.hpp"
#include "fscil/protocol.hpp"

using namespace fscil;

namespace {

SyntheticConfig tiny_data_config() {
  SyntheticConfig config;
  config.input_dim = 8;
  config.num_classes = 10;
  config.train_per_class = 12;
  config.test_per_class = 6;
  config.separation = 3.0;
  config.noise_std = 0.8;
  config.seed = 3;
  return config;
}

SessionPlan tiny_plan() {
  SessionPlan plan;
  plan.base_classes = 4;
  plan.num_incremental_sessions = 3;
  plan.ways = 2;
  plan.shots = 4;
  plan.seed = 3;
  return plan;
}

TrainConfig tiny_train_config() {
  TrainConfig config;
  config.epochs = 8;
  config.batch_size = 8;
  config.learning_rate = 0.05;
  config.incremental_epochs = 6;
  config.incremental_learning_rate = 0.01;
  config.hidden_dims = {12};
  config.feature_dim = 5;
  config.seed = 3;
  config.hyperparams.gamma = 0.01;
  config.hyperparams.alpha = 0.01;
  return config;
}

std::string extractor_bytes(const TrainedState& state) {
  TrainedState probe;
  probe.extractor = state.extractor;
  probe.head = make_zero_statistics_head(state.extractor.feature_dim());
  return serialize_state(probe);
}

}  // namespace

TEST_CASE("base training is deterministic") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  const TrainConfig config = tiny_train_config();
  const TrainedState a = train_base(sessions.front(), config);
  const TrainedState b = train_base(sessions.front(), config);
  CHECK(serialize_state(a) == serialize_state(b));

  TrainConfig other = config;
  other.seed = 4;
  const TrainedState c = train_base(sessions.front(), other);
  CHECK(serialize_state(a) != serialize_state(c));
}

TEST_CASE("zero calibration weight leaves the statistics head at its init") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig config = tiny_train_config();

  config.hyperparams.gamma = 0.0;
  const TrainedState plain = train_base(sessions.front(), config);
  RandomStream rng(config.seed, "head-init");
  const StatisticsHead fresh = make_statistics_head(config.feature_dim, rng);
  CHECK(plain.head.logvar.weights.values == fresh.logvar.weights.values);
  CHECK(plain.head.mu.weights.values == fresh.mu.weights.values);

  config.hyperparams.gamma = 0.01;
  const TrainedState calibrated = train_base(sessions.front(), config);
  CHECK(calibrated.head.logvar.weights.values != fresh.logvar.weights.values);
}

TEST_CASE("calibration pulls predicted log-variances toward zero") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig config = tiny_train_config();
  config.epochs = 20;

  config.hyperparams.gamma = 0.0;
  const TrainedState plain = train_base(sessions.front(), config);
  config.hyperparams.gamma = 0.01;
  const TrainedState calibrated = train_base(sessions.front(), config);

  const double before =
      mean_abs_logvar(plain.extractor, plain.head, sessions.front().train);
  const double after = mean_abs_logvar(calibrated.extractor, calibrated.head,
                                       sessions.front().train);
  CHECK(after < before);
}

TEST_CASE("incremental sessions enroll classes without touching the rest") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  const TrainConfig config = tiny_train_config();

  for (Strategy strategy :
       {Strategy::kPrototype, Strategy::kFinetuneCe, Strategy::kSpl}) {
    CAPTURE(to_string(strategy));
    TrainConfig run_config = config;
    run_config.strategy = strategy;
    TrainedState state = train_base(sessions.front(), run_config);
    const std::string frozen_extractor = extractor_bytes(state);
    const std::string frozen_head = serialize_state([&] {
      TrainedState probe;
      probe.extractor = state.extractor;
      probe.head = state.head;
      return probe;
    }());

    std::size_t expected = tiny_plan().base_classes;
    std::vector<Vec64> old_prototypes = state.classifier.prototypes;
    for (std::size_t t = 1; t < sessions.size(); ++t) {
      incremental_update(state, sessions[t], run_config);
      expected += tiny_plan().ways;
      CHECK(state.classifier.num_classes() == expected);
      CHECK(extractor_bytes(state) == frozen_extractor);
      CHECK(serialize_state([&] {
              TrainedState probe;
              probe.extractor = state.extractor;
              probe.head = state.head;
              return probe;
            }()) == frozen_head);
      // Previously held prototypes are bit-identical.
      for (std::size_t c = 0; c < old_prototypes.size(); ++c) {
        CHECK(state.classifier.prototypes[c] == old_prototypes[c]);
      }
      old_prototypes = state.classifier.prototypes;
    }

    // Every class id appears exactly once, across all sessions.
    std::set<std::uint32_t> ids(state.classifier.class_ids.begin(),
                                state.classifier.class_ids.end());
    CHECK(ids.size() == state.classifier.class_ids.size());
  }
}

TEST_CASE("appended prototypes are the exact feature means") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig config = tiny_train_config();
  config.strategy = Strategy::kPrototype;
  TrainedState state = train_base(sessions.front(), config);
  const std::size_t old_count = state.classifier.num_classes();
  incremental_update(state, sessions[1], config);

  std::map<std::uint32_t, std::vector<Vec64>> by_class;
  for (const LabeledSample& sample : sessions[1].train) {
    by_class[sample.label].push_back(
        extract_features(state.extractor, sample.input));
  }
  std::size_t slot = old_count;
  for (std::uint32_t cls : sessions[1].new_class_ids) {
    const Vec64 expected = compute_prototype(by_class.at(cls));
    CHECK(state.classifier.class_ids[slot] == cls);
    CHECK(state.classifier.prototypes[slot] == expected);  // bit-exact
    ++slot;
  }
}

TEST_CASE("finetuning moves only the new prototypes") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig proto_config = tiny_train_config();
  proto_config.strategy = Strategy::kPrototype;
  TrainConfig tune_config = proto_config;
  tune_config.strategy = Strategy::kFinetuneCe;

  TrainedState reference = train_base(sessions.front(), proto_config);
  TrainedState tuned = reference;
  incremental_update(reference, sessions[1], proto_config);
  incremental_update(tuned, sessions[1], tune_config);

  const std::size_t old_count = tiny_plan().base_classes;
  for (std::size_t c = 0; c < old_count; ++c) {
    CHECK(tuned.classifier.prototypes[c] == reference.classifier.prototypes[c]);
  }
  bool moved = false;
  for (std::size_t c = old_count; c < tuned.classifier.num_classes(); ++c) {
    moved = moved ||
            tuned.classifier.prototypes[c] != reference.classifier.prototypes[c];
  }
  CHECK(moved);
}

TEST_CASE("first perturbation epoch starts from doubled cross entropy") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig config = tiny_train_config();
  config.strategy = Strategy::kPrototype;
  TrainedState state = train_base(sessions.front(), config);
  incremental_update(state, sessions[1], config);

  // Recreate the perturbation setup at the top of its first epoch: a fresh
  // zero head makes the perturbed pass coincide with the clean one.
  std::vector<Vec64> features;
  std::vector<std::size_t> targets;
  std::map<std::uint32_t, std::size_t> index;
  for (std::size_t c = 0; c < state.classifier.num_classes(); ++c) {
    index[state.classifier.class_ids[c]] = c;
  }
  for (const LabeledSample& sample : sessions[1].train) {
    features.push_back(extract_features(state.extractor, sample.input));
    targets.push_back(index.at(sample.label));
  }
  std::vector<Vec64> priors;
  for (std::size_t b = 0; b < features.size(); ++b) {
    priors.push_back(prior_mean(
        similarity_scores(features[b], state.classifier, targets[b]),
        state.classifier));
  }
  const StatisticsHead zero_head =
      make_zero_statistics_head(config.feature_dim);
  const LossValue loss = incremental_objective(
      zero_head, state.classifier, features, targets, priors, 0.0, nullptr);
  CHECK(loss.components.at("ce_clean") ==
        doctest::Approx(loss.components.at("ce_perturbed")).epsilon(1e-12));
  CHECK(loss.value ==
        doctest::Approx(2.0 * loss.components.at("ce_clean")).epsilon(1e-12));
}

TEST_CASE("experiment reports one row per session with coherent summary") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const TrainConfig config = tiny_train_config();
  const ExperimentResult result = run_experiment(data, tiny_plan(), config);
  REQUIRE(result.reports.size() == tiny_plan().num_incremental_sessions + 1);
  for (std::size_t t = 0; t < result.reports.size(); ++t) {
    CHECK(result.reports[t].session_index == t);
    CHECK(result.reports[t].acc_overall >= 0.0);
    CHECK(result.reports[t].acc_overall <= 1.0);
  }
  CHECK_FALSE(result.reports.front().acc_new.has_value());
  CHECK(result.reports.back().acc_new.has_value());
  CHECK(result.summary.pd ==
        doctest::Approx(result.summary.base_acc - result.summary.final_old));
  CHECK(result.state.classifier.num_classes() ==
        tiny_plan().base_classes +
            tiny_plan().num_incremental_sessions * tiny_plan().ways);
}

TEST_CASE("comparison rows match standalone runs bit for bit") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const TrainConfig config = tiny_train_config();
  const std::vector<NamedResult> rows =
      compare_methods(data, tiny_plan(), config);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "ce_prototype");
  CHECK(rows[3].name == "ccl_spl");

  TrainConfig ce_config = config;
  ce_config.hyperparams.gamma = 0.0;
  ce_config.strategy = Strategy::kPrototype;
  const ExperimentResult ce_run = run_experiment(data, tiny_plan(), ce_config);
  CHECK(serialize_state(ce_run.state) == serialize_state(rows[0].result.state));
  REQUIRE(ce_run.reports.size() == rows[0].result.reports.size());
  for (std::size_t t = 0; t < ce_run.reports.size(); ++t) {
    CHECK(ce_run.reports[t].acc_overall ==
          rows[0].result.reports[t].acc_overall);
  }

  TrainConfig spl_config = config;
  spl_config.strategy = Strategy::kSpl;
  const ExperimentResult spl_run = run_experiment(data, tiny_plan(), spl_config);
  CHECK(serialize_state(spl_run.state) ==
        serialize_state(rows[3].result.state));
}

TEST_CASE("sweep covers the grid and its origin matches a direct run") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  TrainConfig config = tiny_train_config();
  config.strategy = Strategy::kPrototype;
  const std::vector<double> gammas = {0.0, 0.01};
  const std::vector<double> alphas = {0.0, 0.1};
  const std::vector<SweepCell> cells =
      sweep_hyperparams(data, tiny_plan(), config, gammas, alphas);
  REQUIRE(cells.size() == 4);

  TrainConfig origin = config;
  origin.hyperparams.gamma = 0.0;
  origin.hyperparams.alpha = 0.0;
  const ExperimentResult direct = run_experiment(data, tiny_plan(), origin);
  CHECK(cells[0].gamma == 0.0);
  CHECK(cells[0].alpha == 0.0);
  CHECK(cells[0].final_overall == direct.summary.final_overall);

  // With the mean-prototype strategy alpha is inert: equal final accuracy
  // across alphas at fixed gamma.
  CHECK(cells[0].final_overall == cells[1].final_overall);
  CHECK(cells[2].final_overall == cells[3].final_overall);
}

TEST_CASE("duplicate enrollment is rejected") {
  const SyntheticDataset data = generate_synthetic(tiny_data_config());
  const auto sessions = split_sessions(data, tiny_plan());
  TrainConfig config = tiny_train_config();
  config.strategy = Strategy::kPrototype;
  TrainedState state = train_base(sessions.front(), config);
  incremental_update(state, sessions[1], config);
  CHECK_THROWS_AS(incremental_update(state, sessions[1], config),
                  std::invalid_argument);
}

TEST_CASE("strategy names round trip") {
  Strategy s = Strategy::kPrototype;
  CHECK(parse_strategy("spl", s));
  CHECK(s == Strategy::kSpl);
  CHECK(parse_strategy("finetune_ce", s));
  CHECK(s == Strategy::kFinetuneCe);
  CHECK_FALSE(parse_strategy("bogus", s));
  CHECK(std::string(to_string(Strategy::kPrototype)) == "prototype");
}
