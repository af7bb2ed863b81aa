#include "fscil/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fscil/io.hpp"
#include "fscil/random.hpp"

namespace fscil {

namespace {

constexpr std::size_t kMaxCenterAttempts = 10000;

double squared_distance(const Vec64& a, const Vec64& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Within a family, raw centers sit at `direction + kFamilySpread * offset`
// with unit offsets, so sibling classes are roughly kFamilySpread apart while
// distinct families are ~sqrt(2) apart: the nearest neighbours of any class
// are its siblings, by construction.
constexpr double kFamilySpread = 0.4;
// Families whose directions are more aligned than this would blur into one
// another, defeating the near/far structure; redraw instead.
constexpr double kMaxFamilyCosine = 0.5;

Vec64 draw_unit(RandomStream& rng, std::size_t dim, std::size_t& attempts,
                const SyntheticConfig& config) {
  while (true) {
    if (++attempts > kMaxCenterAttempts) {
      throw std::runtime_error(
          "generate_synthetic: cannot place " +
          std::to_string(config.num_classes) + " centers with separation " +
          format_double(config.separation) + " in dimension " +
          std::to_string(config.input_dim));
    }
    Vec64 v = rng.draw_normal(dim);
    const double n = norm(v);
    if (n == 0.0) continue;
    for (double& x : v) x /= n;
    return v;
  }
}

std::vector<Vec64> sample_centers(const SyntheticConfig& config) {
  RandomStream rng(config.seed, "data-centers");
  const std::size_t families =
      std::max<std::size_t>(2, config.num_classes / 4);
  std::size_t attempts = 0;

  std::vector<Vec64> directions;
  directions.reserve(families);
  while (directions.size() < families) {
    Vec64 dir = draw_unit(rng, config.input_dim, attempts, config);
    bool distinct = true;
    for (const Vec64& f : directions) {
      if (dot(f, dir) > kMaxFamilyCosine) {
        distinct = false;
        break;
      }
    }
    if (distinct) directions.push_back(std::move(dir));
  }

  std::vector<Vec64> centers(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    const Vec64 offset = draw_unit(rng, config.input_dim, attempts, config);
    const Vec64& dir = directions[c % families];
    centers[c].resize(config.input_dim);
    for (std::size_t i = 0; i < config.input_dim; ++i) {
      centers[c][i] = dir[i] + kFamilySpread * offset[i];
    }
  }

  // Scale the frame so the closest pair sits exactly at the requested
  // separation; every other pair is then at least that far apart.
  double min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centers.size(); ++a) {
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      min_sq = std::min(min_sq, squared_distance(centers[a], centers[b]));
    }
  }
  if (centers.size() > 1) {
    if (min_sq == 0.0) {
      throw std::runtime_error(
          "generate_synthetic: coincident class centers for " +
          std::to_string(config.num_classes) + " classes in dimension " +
          std::to_string(config.input_dim));
    }
    const double scale = config.separation / std::sqrt(min_sq);
    for (Vec64& center : centers) {
      for (double& x : center) x *= scale;
    }
  }
  return centers;
}

std::vector<LabeledSample> sample_blobs(const std::vector<Vec64>& centers,
                                        std::size_t per_class, double noise_std,
                                        std::uint64_t seed,
                                        std::string_view purpose) {
  RandomStream rng(seed, purpose);
  std::vector<LabeledSample> out;
  out.reserve(centers.size() * per_class);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      LabeledSample sample;
      sample.label = static_cast<std::uint32_t>(c);
      sample.input = rng.draw_normal(centers[c].size());
      for (std::size_t i = 0; i < sample.input.size(); ++i) {
        sample.input[i] = centers[c][i] + noise_std * sample.input[i];
      }
      out.push_back(std::move(sample));
    }
  }
  return out;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.input_dim == 0 || config.num_classes == 0 ||
      config.train_per_class == 0 || config.test_per_class == 0) {
    throw std::invalid_argument("generate_synthetic: zero-sized config");
  }
  if (!(config.separation > 0.0) || !(config.noise_std >= 0.0)) {
    throw std::invalid_argument("generate_synthetic: bad separation/noise");
  }
  const std::vector<Vec64> centers = sample_centers(config);
  SyntheticDataset data;
  data.input_dim = config.input_dim;
  data.num_classes = config.num_classes;
  data.train = sample_blobs(centers, config.train_per_class, config.noise_std,
                            config.seed, "data-train");
  data.test = sample_blobs(centers, config.test_per_class, config.noise_std,
                           config.seed, "data-test");
  return data;
}

std::vector<SessionDataset> split_sessions(const SyntheticDataset& data,
                                           const SessionPlan& plan) {
  if (plan.base_classes == 0 || plan.ways == 0 || plan.shots == 0) {
    throw std::invalid_argument("split_sessions: zero-sized plan");
  }
  const std::size_t needed =
      plan.base_classes + plan.num_incremental_sessions * plan.ways;
  if (data.num_classes < needed) {
    throw std::invalid_argument("split_sessions: dataset has " +
                                std::to_string(data.num_classes) +
                                " classes, plan needs " + std::to_string(needed));
  }

  std::vector<std::uint32_t> order(data.num_classes);
  std::iota(order.begin(), order.end(), 0u);
  if (plan.shuffle_classes) {
    RandomStream rng(plan.seed, "split/class-order");
    rng.shuffle(order);
  }

  // Per-class sample indices, in generation order.
  std::vector<std::vector<std::size_t>> train_by_class(data.num_classes);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    train_by_class[data.train[i].label].push_back(i);
  }
  std::vector<std::vector<std::size_t>> test_by_class(data.num_classes);
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    test_by_class[data.test[i].label].push_back(i);
  }

  std::vector<SessionDataset> sessions;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t <= plan.num_incremental_sessions; ++t) {
    SessionDataset session;
    session.session_index = t;
    const std::size_t width = t == 0 ? plan.base_classes : plan.ways;
    for (std::size_t k = 0; k < width; ++k) {
      session.new_class_ids.push_back(order[cursor++]);
    }
    std::sort(session.new_class_ids.begin(), session.new_class_ids.end());

    for (std::uint32_t cls : session.new_class_ids) {
      std::vector<std::size_t> chosen = train_by_class[cls];
      if (t > 0) {
        if (chosen.size() < plan.shots) {
          throw std::invalid_argument(
              "split_sessions: class " + std::to_string(cls) + " has " +
              std::to_string(chosen.size()) + " training samples, need " +
              std::to_string(plan.shots) + " shots");
        }
        RandomStream rng(plan.seed,
                         "split/shots/" + std::to_string(t) + "/" +
                             std::to_string(cls));
        for (std::size_t i = 0; i < plan.shots; ++i) {
          const std::size_t j = i + rng.next_index(chosen.size() - i);
          std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(plan.shots);
        std::sort(chosen.begin(), chosen.end());
      }
      for (std::size_t idx : chosen) session.train.push_back(data.train[idx]);
      for (std::size_t idx : test_by_class[cls]) {
        session.test.push_back(data.test[idx]);
      }
    }
    sessions.push_back(std::move(session));
  }
  return sessions;
}

EmbeddingTable load_embeddings_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  EmbeddingTable table;

  const auto fail = [&path, &line_no](const std::string& message) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                             message);
  };

  if (!std::getline(in, line)) {
    ++line_no;
    fail("missing header");
  }
  ++line_no;
  if (line.rfind("label", 0) != 0) fail("header must start with 'label'");
  table.dim = static_cast<std::size_t>(
      std::count(line.begin(), line.end(), ',') );

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) fail("empty row");
    LabeledSample sample;
    try {
      const double label = parse_double(cell);
      if (label < 0 || label != std::floor(label)) {
        fail("label must be a nonnegative integer, got '" + cell + "'");
      }
      sample.label = static_cast<std::uint32_t>(label);
      while (std::getline(row, cell, ',')) {
        sample.input.push_back(parse_double(cell));
      }
    } catch (const std::runtime_error& e) {
      fail(e.what());
    }
    if (sample.input.size() != table.dim) {
      fail("expected " + std::to_string(table.dim) + " feature columns, got " +
           std::to_string(sample.input.size()));
    }
    table.rows.push_back(std::move(sample));
  }
  return table;
}

void export_embeddings_csv(const std::string& path, const EmbeddingTable& table) {
  std::ostringstream out;
  out << "label";
  for (std::size_t i = 0; i < table.dim; ++i) out << ",f" << i;
  out << "\n";
  for (const LabeledSample& row : table.rows) {
    if (row.input.size() != table.dim) {
      throw std::invalid_argument("export_embeddings_csv: row dim mismatch");
    }
    out << row.label;
    for (double v : row.input) out << "," << format_double(v);
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace fscil
