#include "fscil/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fscil/io.hpp"

namespace fscil {

SessionReport evaluate(const MlpExtractor& extractor,
                       const PrototypeClassifier& classifier,
                       const std::vector<LabeledSample>& test_samples,
                       const std::vector<std::uint32_t>& base_class_ids,
                       std::size_t session_index) {
  if (test_samples.empty()) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  SessionReport report;
  report.session_index = session_index;
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> tally;
  std::size_t correct = 0;
  std::size_t base_correct = 0, base_total = 0;
  std::size_t new_correct = 0, new_total = 0;
  for (const LabeledSample& sample : test_samples) {
    const Vec64 f = extract_features(extractor, sample.input);
    const bool hit = predict_label(classifier, f) == sample.label;
    auto& cell = tally[sample.label];
    ++cell.second;
    if (hit) ++cell.first;
    if (hit) ++correct;
    const bool is_base =
        std::find(base_class_ids.begin(), base_class_ids.end(), sample.label) !=
        base_class_ids.end();
    if (is_base) {
      ++base_total;
      if (hit) ++base_correct;
    } else {
      ++new_total;
      if (hit) ++new_correct;
    }
  }
  report.acc_overall =
      static_cast<double>(correct) / static_cast<double>(test_samples.size());
  if (base_total == 0) {
    throw std::invalid_argument("evaluate: no base-class test samples");
  }
  report.acc_base =
      static_cast<double>(base_correct) / static_cast<double>(base_total);
  if (new_total > 0) {
    report.acc_new =
        static_cast<double>(new_correct) / static_cast<double>(new_total);
  }
  for (const auto& [cls, cell] : tally) {
    report.per_class[cls] =
        static_cast<double>(cell.first) / static_cast<double>(cell.second);
  }
  return report;
}

ExperimentSummary summarize(const std::vector<SessionReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("summarize: no reports");
  ExperimentSummary summary;
  summary.base_acc = reports.front().acc_overall;
  summary.final_overall = reports.back().acc_overall;
  summary.final_old = reports.back().acc_base;
  summary.final_new = reports.back().acc_new;
  double acc = 0.0;
  for (const SessionReport& r : reports) acc += r.acc_overall;
  summary.average_acc = acc / static_cast<double>(reports.size());
  summary.pd = summary.base_acc - summary.final_old;
  if (summary.final_new.has_value()) {
    const double o = summary.final_old;
    const double n = *summary.final_new;
    if (o + n > 0.0) summary.harmonic = 2.0 * o * n / (o + n);
  }
  return summary;
}

double final_improvement(const ExperimentSummary& ours,
                         const ExperimentSummary& baseline) {
  return ours.final_overall - baseline.final_overall;
}

bool parse_table_format(const std::string& text, TableFormat& out) {
  if (text == "text") out = TableFormat::kText;
  else if (text == "csv") out = TableFormat::kCsv;
  else if (text == "json") out = TableFormat::kJson;
  else return false;
  return true;
}

const char* to_string(TableFormat format) {
  switch (format) {
    case TableFormat::kText: return "text";
    case TableFormat::kCsv: return "csv";
    case TableFormat::kJson: return "json";
  }
  return "unknown";
}

namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string optional_cell(const std::optional<double>& value, TableFormat format) {
  if (!value.has_value()) return format == TableFormat::kText ? "-" : "";
  return format == TableFormat::kText ? percent(*value) : format_double(*value);
}

double best_final(const std::vector<MethodRow>& rows) {
  double best = rows.front().summary.final_overall;
  for (const MethodRow& row : rows) {
    best = std::max(best, row.summary.final_overall);
  }
  return best;
}

std::string emit_sessions_text(const std::vector<MethodRow>& rows) {
  const std::size_t sessions = rows.front().reports.size();
  std::ostringstream out;
  std::size_t name_width = 6;
  for (const MethodRow& row : rows) {
    name_width = std::max(name_width, row.name.size());
  }
  out << std::left << std::setw(static_cast<int>(name_width + 2)) << "method";
  for (std::size_t t = 0; t < sessions; ++t) {
    out << std::right << std::setw(9) << ("s" + std::to_string(t));
  }
  out << std::right << std::setw(9) << "avg" << std::setw(13) << "final_improv"
      << "\n";
  const double best = best_final(rows);
  for (const MethodRow& row : rows) {
    out << std::left << std::setw(static_cast<int>(name_width + 2)) << row.name;
    for (const SessionReport& r : row.reports) {
      out << std::right << std::setw(9) << percent(r.acc_overall);
    }
    out << std::right << std::setw(9) << percent(row.summary.average_acc)
        << std::setw(13) << percent(best - row.summary.final_overall) << "\n";
  }
  return out.str();
}

std::string emit_summary_text(const std::vector<MethodRow>& rows) {
  std::ostringstream out;
  std::size_t name_width = 6;
  for (const MethodRow& row : rows) {
    name_width = std::max(name_width, row.name.size());
  }
  out << std::left << std::setw(static_cast<int>(name_width + 2)) << "method"
      << std::right << std::setw(9) << "base" << std::setw(9) << "old"
      << std::setw(9) << "new" << std::setw(9) << "avg" << std::setw(9) << "pd"
      << std::setw(9) << "harm" << "\n";
  for (const MethodRow& row : rows) {
    const ExperimentSummary& s = row.summary;
    out << std::left << std::setw(static_cast<int>(name_width + 2)) << row.name
        << std::right << std::setw(9) << percent(s.base_acc) << std::setw(9)
        << percent(s.final_old) << std::setw(9)
        << optional_cell(s.final_new, TableFormat::kText) << std::setw(9)
        << percent(s.average_acc) << std::setw(9) << percent(s.pd)
        << std::setw(9) << optional_cell(s.harmonic, TableFormat::kText)
        << "\n";
  }
  return out.str();
}

std::string emit_sessions_csv(const std::vector<MethodRow>& rows) {
  const std::size_t sessions = rows.front().reports.size();
  std::ostringstream out;
  out << "method";
  for (std::size_t t = 0; t < sessions; ++t) out << ",session_" << t;
  out << ",avg,final_improv\n";
  const double best = best_final(rows);
  for (const MethodRow& row : rows) {
    out << row.name;
    for (const SessionReport& r : row.reports) {
      out << "," << format_double(r.acc_overall);
    }
    out << "," << format_double(row.summary.average_acc) << ","
        << format_double(best - row.summary.final_overall) << "\n";
  }
  return out.str();
}

std::string emit_summary_csv(const std::vector<MethodRow>& rows) {
  std::ostringstream out;
  out << "method,base,old,new,avg,pd,harmonic\n";
  for (const MethodRow& row : rows) {
    const ExperimentSummary& s = row.summary;
    out << row.name << "," << format_double(s.base_acc) << ","
        << format_double(s.final_old) << ","
        << optional_cell(s.final_new, TableFormat::kCsv) << ","
        << format_double(s.average_acc) << "," << format_double(s.pd) << ","
        << optional_cell(s.harmonic, TableFormat::kCsv) << "\n";
  }
  return out.str();
}

nlohmann::json summary_json(const ExperimentSummary& s) {
  nlohmann::json j;
  j["base"] = s.base_acc;
  j["final_overall"] = s.final_overall;
  j["old"] = s.final_old;
  j["new"] = s.final_new.has_value() ? nlohmann::json(*s.final_new)
                                     : nlohmann::json(nullptr);
  j["avg"] = s.average_acc;
  j["pd"] = s.pd;
  j["harmonic"] = s.harmonic.has_value() ? nlohmann::json(*s.harmonic)
                                         : nlohmann::json(nullptr);
  return j;
}

std::string emit_json(const std::vector<MethodRow>& rows, TableLayout layout) {
  nlohmann::json arr = nlohmann::json::array();
  const double best = best_final(rows);
  for (const MethodRow& row : rows) {
    nlohmann::json j;
    j["method"] = row.name;
    if (layout == TableLayout::kSessions) {
      nlohmann::json sess = nlohmann::json::array();
      for (const SessionReport& r : row.reports) sess.push_back(r.acc_overall);
      j["sessions"] = sess;
      j["avg"] = row.summary.average_acc;
      j["final_improv"] = best - row.summary.final_overall;
    } else {
      j = summary_json(row.summary);
      j["method"] = row.name;
    }
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace

std::string emit_table(const std::vector<MethodRow>& rows, TableLayout layout,
                       TableFormat format) {
  if (rows.empty()) throw std::invalid_argument("emit_table: no rows");
  for (const MethodRow& row : rows) {
    if (row.reports.size() != rows.front().reports.size()) {
      throw std::invalid_argument("emit_table: inconsistent session counts");
    }
  }
  switch (format) {
    case TableFormat::kText:
      return layout == TableLayout::kSessions ? emit_sessions_text(rows)
                                              : emit_summary_text(rows);
    case TableFormat::kCsv:
      return layout == TableLayout::kSessions ? emit_sessions_csv(rows)
                                              : emit_summary_csv(rows);
    case TableFormat::kJson:
      return emit_json(rows, layout);
  }
  throw std::logic_error("emit_table: bad format");
}

std::string results_csv(const std::vector<MethodRow>& rows, std::uint64_t seed) {
  if (rows.empty()) throw std::invalid_argument("results_csv: no rows");
  const std::size_t sessions = rows.front().reports.size();
  std::ostringstream out;
  out << "method,seed";
  for (std::size_t t = 0; t < sessions; ++t) out << ",session_" << t;
  out << ",avg,final_improv,base,old,new,pd,harmonic\n";
  const double best = best_final(rows);
  for (const MethodRow& row : rows) {
    if (row.reports.size() != sessions) {
      throw std::invalid_argument("results_csv: inconsistent session counts");
    }
    const ExperimentSummary& s = row.summary;
    out << row.name << "," << seed;
    for (const SessionReport& r : row.reports) {
      out << "," << format_double(r.acc_overall);
    }
    out << "," << format_double(s.average_acc) << ","
        << format_double(best - s.final_overall) << ","
        << format_double(s.base_acc) << "," << format_double(s.final_old) << ","
        << optional_cell(s.final_new, TableFormat::kCsv) << ","
        << format_double(s.pd) << ","
        << optional_cell(s.harmonic, TableFormat::kCsv) << "\n";
  }
  return out.str();
}

}  // namespace fscil
