#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fscil/data.hpp"
#include "fscil/protocol.hpp"

namespace fscil {

// Invalid configuration input; carries the offending field name. CLI maps
// this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("field '" + field + "': " + message),
        field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  SyntheticConfig data;
  SessionPlan plan;
  TrainConfig train;
  std::vector<double> sweep_gammas = {0.0, 0.0001, 0.001, 0.01, 0.1};
  std::vector<double> sweep_alphas = {0.0, 0.0001, 0.001, 0.01, 0.1};
};

// Parses flat "key = value" lines ('#' starts a comment, blank lines are
// skipped) over the defaults. Unknown keys and malformed values raise
// ConfigError. When num_classes is not given it defaults to exactly the
// classes the session plan needs.
RunConfig parse_config_text(const std::string& text);

RunConfig load_config_file(const std::string& path);

// Single seed fan-out: data synthesis, session splitting, and training all
// derive their streams from this value (with distinct purpose labels).
void apply_seed(RunConfig& config, std::uint64_t seed);

// Cross-field checks (plan fits the dataset, shots available, positive
// rates). Raises ConfigError.
void validate_config(const RunConfig& config);

// Canonical "key = value" rendering; parses back to an identical config.
std::string config_to_text(const RunConfig& config);

}  // namespace fscil
