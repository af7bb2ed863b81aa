#include "fscil/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <type_traits>

#include "fscil/io.hpp"

namespace fscil {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-') {
    throw ConfigError(key, "expected a nonnegative integer, got '" + value + "'");
  }
  errno = 0;
  char* end = nullptr;
  const std::uint64_t parsed = std::strtoull(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || errno == ERANGE) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + value + "'");
  }
  return parsed;
}

std::size_t parse_positive(const std::string& key, const std::string& value) {
  const std::uint64_t parsed = parse_u64(key, value);
  if (parsed == 0) throw ConfigError(key, "must be >= 1");
  return static_cast<std::size_t>(parsed);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    return parse_double(value);
  } catch (const std::runtime_error&) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
}

double parse_nonnegative(const std::string& key, const std::string& value) {
  const double parsed = parse_number(key, value);
  if (!(parsed >= 0.0)) throw ConfigError(key, "must be >= 0");
  return parsed;
}

double parse_positive_number(const std::string& key, const std::string& value) {
  const double parsed = parse_number(key, value);
  if (!(parsed > 0.0)) throw ConfigError(key, "must be > 0");
  return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_number_list(const std::string& key,
                                      const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_commas(value)) {
    out.push_back(parse_nonnegative(key, item));
  }
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

std::vector<std::size_t> parse_dim_list(const std::string& key,
                                        const std::string& value) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_commas(value)) {
    out.push_back(parse_positive(key, item));
  }
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::optional<std::size_t> explicit_num_classes;
  std::istringstream in(text);
  std::string raw_line;
  std::size_t line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "expected 'key = value', got '" + trim(raw_line) + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no), "empty key");
    }
    if (value.empty()) throw ConfigError(key, "empty value");

    if (key == "seed") {
      apply_seed(config, parse_u64(key, value));
    } else if (key == "input_dim") {
      config.data.input_dim = parse_positive(key, value);
    } else if (key == "num_classes") {
      explicit_num_classes = parse_positive(key, value);
    } else if (key == "train_per_class") {
      config.data.train_per_class = parse_positive(key, value);
    } else if (key == "test_per_class") {
      config.data.test_per_class = parse_positive(key, value);
    } else if (key == "separation") {
      config.data.separation = parse_positive_number(key, value);
    } else if (key == "noise_std") {
      config.data.noise_std = parse_nonnegative(key, value);
    } else if (key == "base_classes") {
      config.plan.base_classes = parse_positive(key, value);
    } else if (key == "sessions") {
      config.plan.num_incremental_sessions =
          static_cast<std::size_t>(parse_u64(key, value));
    } else if (key == "ways") {
      config.plan.ways = parse_positive(key, value);
    } else if (key == "shots") {
      config.plan.shots = parse_positive(key, value);
    } else if (key == "shuffle_classes") {
      config.plan.shuffle_classes = parse_bool(key, value);
    } else if (key == "epochs") {
      config.train.epochs = parse_positive(key, value);
    } else if (key == "batch_size") {
      config.train.batch_size = parse_positive(key, value);
    } else if (key == "learning_rate") {
      config.train.learning_rate = parse_positive_number(key, value);
    } else if (key == "incremental_epochs") {
      config.train.incremental_epochs = parse_positive(key, value);
    } else if (key == "incremental_learning_rate") {
      config.train.incremental_learning_rate = parse_positive_number(key, value);
    } else if (key == "gamma") {
      config.train.hyperparams.gamma = parse_nonnegative(key, value);
    } else if (key == "alpha") {
      config.train.hyperparams.alpha = parse_nonnegative(key, value);
    } else if (key == "strategy") {
      if (!parse_strategy(value, config.train.strategy)) {
        throw ConfigError(key,
                          "expected prototype|finetune_ce|spl, got '" + value +
                              "'");
      }
    } else if (key == "hidden_dims") {
      config.train.hidden_dims = parse_dim_list(key, value);
    } else if (key == "feature_dim") {
      config.train.feature_dim = parse_positive(key, value);
    } else if (key == "sweep_gammas") {
      config.sweep_gammas = parse_number_list(key, value);
    } else if (key == "sweep_alphas") {
      config.sweep_alphas = parse_number_list(key, value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  config.data.num_classes =
      explicit_num_classes.value_or(config.plan.base_classes +
                                    config.plan.num_incremental_sessions *
                                        config.plan.ways);
  return config;
}

RunConfig load_config_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config_text(text);
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.data.seed = seed;
  config.plan.seed = seed;
  config.train.seed = seed;
}

void validate_config(const RunConfig& config) {
  const std::size_t needed =
      config.plan.base_classes +
      config.plan.num_incremental_sessions * config.plan.ways;
  if (config.data.num_classes < needed) {
    throw ConfigError("num_classes",
                      "dataset has " + std::to_string(config.data.num_classes) +
                          " classes but the session plan needs " +
                          std::to_string(needed));
  }
  if (config.plan.shots > config.data.train_per_class) {
    throw ConfigError("shots",
                      "asks for " + std::to_string(config.plan.shots) +
                          " shots but train_per_class is " +
                          std::to_string(config.data.train_per_class));
  }
  if (config.data.seed != config.plan.seed ||
      config.data.seed != config.train.seed) {
    throw ConfigError("seed", "inconsistent seed fan-out");
  }
}

std::string config_to_text(const RunConfig& config) {
  std::ostringstream out;
  const auto list = [](const auto& values) {
    std::ostringstream s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) s << ",";
      if constexpr (std::is_floating_point_v<
                        std::decay_t<decltype(values[i])>>) {
        s << format_double(values[i]);
      } else {
        s << values[i];
      }
    }
    return s.str();
  };
  out << "alpha = " << format_double(config.train.hyperparams.alpha) << "\n";
  out << "base_classes = " << config.plan.base_classes << "\n";
  out << "batch_size = " << config.train.batch_size << "\n";
  out << "epochs = " << config.train.epochs << "\n";
  out << "feature_dim = " << config.train.feature_dim << "\n";
  out << "gamma = " << format_double(config.train.hyperparams.gamma) << "\n";
  out << "hidden_dims = " << list(config.train.hidden_dims) << "\n";
  out << "incremental_epochs = " << config.train.incremental_epochs << "\n";
  out << "incremental_learning_rate = "
      << format_double(config.train.incremental_learning_rate) << "\n";
  out << "input_dim = " << config.data.input_dim << "\n";
  out << "learning_rate = " << format_double(config.train.learning_rate)
      << "\n";
  out << "noise_std = " << format_double(config.data.noise_std) << "\n";
  out << "num_classes = " << config.data.num_classes << "\n";
  out << "seed = " << config.train.seed << "\n";
  out << "separation = " << format_double(config.data.separation) << "\n";
  out << "sessions = " << config.plan.num_incremental_sessions << "\n";
  out << "shots = " << config.plan.shots << "\n";
  out << "shuffle_classes = " << (config.plan.shuffle_classes ? "true" : "false")
      << "\n";
  out << "strategy = " << to_string(config.train.strategy) << "\n";
  out << "sweep_alphas = " << list(config.sweep_alphas) << "\n";
  out << "sweep_gammas = " << list(config.sweep_gammas) << "\n";
  out << "test_per_class = " << config.data.test_per_class << "\n";
  out << "train_per_class = " << config.data.train_per_class << "\n";
  out << "ways = " << config.plan.ways << "\n";
  return out.str();
}

}  // namespace fscil
