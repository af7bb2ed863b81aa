#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fscil/data.hpp"
#include "fscil/model.hpp"

namespace fscil {

// Accuracies are fractions in [0, 1] everywhere in memory; only the text
// table layout scales them to percent.
struct SessionReport {
  std::size_t session_index = 0;
  double acc_overall = 0.0;
  double acc_base = 0.0;                // micro over base-class test samples
  std::optional<double> acc_new;        // micro over later classes; absent
                                        // while none are enrolled
  std::map<std::uint32_t, double> per_class;
};

// Classifies every sample through extractor + classifier and micro-averages.
// base_class_ids decides the base/new split of the report.
SessionReport evaluate(const MlpExtractor& extractor,
                       const PrototypeClassifier& classifier,
                       const std::vector<LabeledSample>& test_samples,
                       const std::vector<std::uint32_t>& base_class_ids,
                       std::size_t session_index);

struct ExperimentSummary {
  double base_acc = 0.0;       // overall accuracy after the base session
  double final_overall = 0.0;  // overall accuracy after the last session
  double final_old = 0.0;      // base-class accuracy after the last session
  std::optional<double> final_new;
  double average_acc = 0.0;    // mean of per-session overall accuracies
  double pd = 0.0;             // base_acc - final_old
  std::optional<double> harmonic;  // of final_old and final_new
};

ExperimentSummary summarize(const std::vector<SessionReport>& reports);

// Final-session gain of one run over another.
double final_improvement(const ExperimentSummary& ours,
                         const ExperimentSummary& baseline);

struct MethodRow {
  std::string name;
  std::vector<SessionReport> reports;
  ExperimentSummary summary;
};

enum class TableLayout {
  kSessions,  // per-session overall accuracy, Avg, FinalImprov
  kSummary,   // Base / Old / New / Avg / PD / Harmonic
};

enum class TableFormat { kText, kCsv, kJson };

bool parse_table_format(const std::string& text, TableFormat& out);
const char* to_string(TableFormat format);

// Renders rows in the requested layout. Text scales accuracies to percent
// with two decimals; csv and json keep full-precision fractions. In the
// session layout, FinalImprov of a row is the best final accuracy over all
// rows minus that row's own.
std::string emit_table(const std::vector<MethodRow>& rows, TableLayout layout,
                       TableFormat format);

// Flat per-method record set joining both layouts, for results files.
std::string results_csv(const std::vector<MethodRow>& rows, std::uint64_t seed);

}  // namespace fscil
