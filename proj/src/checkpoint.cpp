#include "fscil/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

#include "fscil/io.hpp"

namespace fscil {

namespace {

constexpr const char* kMagic = "fscil-checkpoint v1";

void emit_values(std::ostringstream& out, const char* tag,
                 const std::vector<double>& values) {
  out << tag;
  for (double v : values) out << " " << format_double_hex(v);
  out << "\n";
}

void emit_layer(std::ostringstream& out, const DenseLayer& layer) {
  out << "layer "
      << (layer.activation == Activation::kRelu ? "relu" : "identity") << " "
      << layer.weights.rows << " " << layer.weights.cols << "\n";
  emit_values(out, "weights", layer.weights.values);
  emit_values(out, "bias", layer.bias);
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::string next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty()) return line;
    }
    throw std::runtime_error("checkpoint: unexpected end of file");
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istringstream in_;
  std::size_t line_no_ = 0;
};

std::vector<double> parse_values(const std::string& line, const char* tag,
                                 std::size_t expected, std::size_t line_no) {
  std::istringstream in(line);
  std::string head;
  in >> head;
  if (head != tag) {
    throw std::runtime_error("checkpoint line " + std::to_string(line_no) +
                             ": expected '" + tag + "', got '" + head + "'");
  }
  std::vector<double> values;
  values.reserve(expected);
  std::string token;
  while (in >> token) values.push_back(parse_double(token));
  if (values.size() != expected) {
    throw std::runtime_error("checkpoint line " + std::to_string(line_no) +
                             ": expected " + std::to_string(expected) +
                             " values, got " + std::to_string(values.size()));
  }
  return values;
}

DenseLayer parse_layer(LineReader& reader) {
  const std::string header = reader.next();
  std::istringstream in(header);
  std::string tag, activation;
  std::size_t rows = 0, cols = 0;
  in >> tag >> activation >> rows >> cols;
  if (tag != "layer" || rows == 0 || cols == 0 ||
      (activation != "relu" && activation != "identity")) {
    throw std::runtime_error("checkpoint line " +
                             std::to_string(reader.line_no()) +
                             ": bad layer header '" + header + "'");
  }
  DenseLayer layer;
  layer.activation =
      activation == "relu" ? Activation::kRelu : Activation::kIdentity;
  layer.weights = Mat64(rows, cols);
  layer.weights.values =
      parse_values(reader.next(), "weights", rows * cols, reader.line_no());
  layer.bias = parse_values(reader.next(), "bias", rows, reader.line_no());
  return layer;
}

}  // namespace

std::string serialize_state(const TrainedState& state) {
  std::ostringstream out;
  out << kMagic << "\n";
  out << "extractor " << state.extractor.layers.size() << "\n";
  for (const DenseLayer& layer : state.extractor.layers) emit_layer(out, layer);
  out << "classifier " << state.classifier.num_classes() << "\n";
  for (std::size_t c = 0; c < state.classifier.num_classes(); ++c) {
    out << "class " << state.classifier.class_ids[c] << "\n";
    emit_values(out, "prototype", state.classifier.prototypes[c]);
  }
  out << "head\n";
  emit_layer(out, state.head.mu);
  emit_layer(out, state.head.logvar);
  out << "base_classes " << state.base_class_ids.size();
  for (std::uint32_t cls : state.base_class_ids) out << " " << cls;
  out << "\n";
  return out.str();
}

TrainedState deserialize_state(const std::string& text) {
  LineReader reader(text);
  if (reader.next() != kMagic) {
    throw std::runtime_error("checkpoint: bad magic line");
  }
  TrainedState state;

  std::istringstream ext_header(reader.next());
  std::string tag;
  std::size_t layer_count = 0;
  ext_header >> tag >> layer_count;
  if (tag != "extractor" || layer_count == 0) {
    throw std::runtime_error("checkpoint: bad extractor header");
  }
  for (std::size_t i = 0; i < layer_count; ++i) {
    state.extractor.layers.push_back(parse_layer(reader));
  }

  std::istringstream cls_header(reader.next());
  std::size_t class_count = 0;
  cls_header >> tag >> class_count;
  if (tag != "classifier") {
    throw std::runtime_error("checkpoint: bad classifier header");
  }
  const std::size_t feature_dim = state.extractor.feature_dim();
  for (std::size_t c = 0; c < class_count; ++c) {
    std::istringstream class_line(reader.next());
    std::uint32_t cls = 0;
    class_line >> tag >> cls;
    if (tag != "class") throw std::runtime_error("checkpoint: bad class line");
    state.classifier.class_ids.push_back(cls);
    state.classifier.prototypes.push_back(
        parse_values(reader.next(), "prototype", feature_dim, reader.line_no()));
  }

  if (reader.next() != "head") {
    throw std::runtime_error("checkpoint: missing head section");
  }
  state.head.mu = parse_layer(reader);
  state.head.logvar = parse_layer(reader);

  std::istringstream base_header(reader.next());
  std::size_t base_count = 0;
  base_header >> tag >> base_count;
  if (tag != "base_classes") {
    throw std::runtime_error("checkpoint: bad base_classes line");
  }
  for (std::size_t i = 0; i < base_count; ++i) {
    std::uint32_t cls = 0;
    if (!(base_header >> cls)) {
      throw std::runtime_error("checkpoint: truncated base_classes line");
    }
    state.base_class_ids.push_back(cls);
  }
  return state;
}

void save_checkpoint(const std::string& path, const TrainedState& state) {
  atomic_write_file(path, serialize_state(state));
}

TrainedState load_checkpoint(const std::string& path) {
  return deserialize_state(read_file(path));
}

}  // namespace fscil
