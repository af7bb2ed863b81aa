#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>

#include "fscil/checkpoint.hpp"
#include "fscil/protocol.hpp"

using namespace fscil;

namespace {

TrainedState make_state() {
  SyntheticConfig data_config;
  data_config.input_dim = 6;
  data_config.num_classes = 5;
  data_config.train_per_class = 8;
  data_config.test_per_class = 4;
  data_config.seed = 21;
  SessionPlan plan;
  plan.base_classes = 3;
  plan.num_incremental_sessions = 1;
  plan.ways = 2;
  plan.shots = 3;
  plan.seed = 21;
  TrainConfig config;
  config.epochs = 4;
  config.hidden_dims = {7};
  config.feature_dim = 4;
  config.seed = 21;
  config.strategy = Strategy::kSpl;
  const SyntheticDataset data = generate_synthetic(data_config);
  return run_experiment(data, plan, config).state;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fscil_ckpt_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("checkpoints round trip bit for bit") {
  const TrainedState state = make_state();
  const std::string text = serialize_state(state);
  const TrainedState back = deserialize_state(text);
  CHECK(serialize_state(back) == text);

  // Every parameter is identical, not merely close.
  REQUIRE(back.extractor.layers.size() == state.extractor.layers.size());
  for (std::size_t li = 0; li < state.extractor.layers.size(); ++li) {
    CHECK(back.extractor.layers[li].weights.values ==
          state.extractor.layers[li].weights.values);
    CHECK(back.extractor.layers[li].bias == state.extractor.layers[li].bias);
    CHECK(back.extractor.layers[li].activation ==
          state.extractor.layers[li].activation);
  }
  CHECK(back.classifier.prototypes == state.classifier.prototypes);
  CHECK(back.classifier.class_ids == state.classifier.class_ids);
  CHECK(back.head.mu.weights.values == state.head.mu.weights.values);
  CHECK(back.head.logvar.bias == state.head.logvar.bias);
  CHECK(back.base_class_ids == state.base_class_ids);
}

TEST_CASE("checkpoint files round trip through disk") {
  TempDir tmp;
  const std::string path = (tmp.path / "model.ckpt").string();
  const TrainedState state = make_state();
  save_checkpoint(path, state);
  const TrainedState back = load_checkpoint(path);
  CHECK(serialize_state(back) == serialize_state(state));
}

TEST_CASE("malformed checkpoints are rejected") {
  const TrainedState state = make_state();
  const std::string text = serialize_state(state);

  CHECK_THROWS_AS(deserialize_state("bogus\n"), std::runtime_error);
  CHECK_THROWS_AS(deserialize_state(text.substr(0, text.size() / 2)),
                  std::runtime_error);

  std::string corrupted = text;
  const std::size_t pos = corrupted.find("0x");  // first hex-float payload
  REQUIRE(pos != std::string::npos);
  corrupted.replace(pos, 2, "zz");
  CHECK_THROWS_AS(deserialize_state(corrupted), std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/path/model.ckpt"),
                  std::runtime_error);
}
