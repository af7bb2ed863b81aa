#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fscil/mathcore.hpp"

namespace fscil {

struct LabeledSample {
  Vec64 input;
  std::uint32_t label = 0;
};

// Isotropic Gaussian class blobs. Class centers are grouped into families
// around shared random directions — classes within a family are close
// together, classes across families far apart — echoing the similarity
// structure of natural label sets, where every class has a few near
// neighbours. Families interleave by class id, so a class gains siblings in
// both the base and the incremental id ranges. The whole frame is scaled so
// the closest pair of centers sits exactly at `separation`; all pairwise
// center distances are therefore >= separation.
struct SyntheticConfig {
  std::size_t input_dim = 16;
  std::size_t num_classes = 24;
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 20;
  double separation = 3.0;
  double noise_std = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

// Deterministic for a given config; centers, train noise, and test noise
// come from independent seed streams, so e.g. changing test_per_class does
// not disturb the training samples. Throws std::runtime_error when the
// requested separation cannot be satisfied.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

// One session of the class-incremental protocol.
struct SessionDataset {
  std::size_t session_index = 0;
  std::vector<std::uint32_t> new_class_ids;  // ascending
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

struct SessionPlan {
  std::size_t base_classes = 12;
  std::size_t num_incremental_sessions = 4;
  std::size_t ways = 3;   // new classes per incremental session
  std::size_t shots = 5;  // training samples kept per new class
  std::uint64_t seed = 1;
  bool shuffle_classes = false;  // default: ascending class ids
};

// Partitions classes into disjoint sessions: the base session keeps every
// training sample of its classes, each incremental session keeps `shots`
// training samples per class (sampled without replacement). Test samples
// are never subsampled.
std::vector<SessionDataset> split_sessions(const SyntheticDataset& data,
                                           const SessionPlan& plan);

// Feature vectors with labels, as read from or written to CSV. The CSV
// carries a "label,f0,f1,..." header; doubles are printed with %.17g so a
// write/read round trip is value-exact.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<LabeledSample> rows;
};

EmbeddingTable load_embeddings_csv(const std::string& path);
void export_embeddings_csv(const std::string& path, const EmbeddingTable& table);

}  // namespace fscil
