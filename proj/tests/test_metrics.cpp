#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include <json.hpp>

#include "fscil/metrics.hpp"

using namespace fscil;

namespace {

// Identity extractor so evaluate() sees the raw inputs as features.
MlpExtractor identity_extractor(std::size_t dim) {
  MlpExtractor ext;
  DenseLayer layer;
  layer.weights = Mat64(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) layer.weights(i, i) = 1.0;
  layer.bias.assign(dim, 0.0);
  layer.activation = Activation::kIdentity;
  ext.layers.push_back(layer);
  return ext;
}

PrototypeClassifier axes_classifier() {
  PrototypeClassifier clf;
  clf.prototypes = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  clf.class_ids = {0, 1, 2};
  return clf;
}

SessionReport report_with(std::size_t index, double overall, double base,
                          std::optional<double> fresh = std::nullopt) {
  SessionReport r;
  r.session_index = index;
  r.acc_overall = overall;
  r.acc_base = base;
  r.acc_new = fresh;
  return r;
}

}  // namespace

TEST_CASE("evaluate micro-averages overall, base, and new accuracies") {
  const MlpExtractor ext = identity_extractor(3);
  const PrototypeClassifier clf = axes_classifier();
  // Classes 0 and 1 are base; class 2 is new. One sample of class 1 is
  // placed on the wrong axis, as are two samples of class 2.
  const std::vector<LabeledSample> samples = {
      {{1.0, 0.1, 0.0}, 0}, {{0.9, -0.1, 0.2}, 0},  // both correct
      {{0.0, 1.0, 0.0}, 1}, {{1.0, 0.0, 0.0}, 1},   // one correct, one wrong
      {{0.0, 0.2, 1.0}, 2}, {{1.0, 0.0, 0.0}, 2},   // one correct, one wrong
      {{0.0, 1.0, 0.1}, 2},                          // wrong
  };
  const SessionReport report = evaluate(ext, clf, samples, {0, 1}, 3);
  CHECK(report.session_index == 3);
  CHECK(report.acc_overall == doctest::Approx(4.0 / 7.0));
  CHECK(report.acc_base == doctest::Approx(3.0 / 4.0));
  REQUIRE(report.acc_new.has_value());
  CHECK(*report.acc_new == doctest::Approx(1.0 / 3.0));
  CHECK(report.per_class.at(0) == doctest::Approx(1.0));
  CHECK(report.per_class.at(1) == doctest::Approx(0.5));
  CHECK(report.per_class.at(2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("evaluate reports no new-class accuracy when none are present") {
  const MlpExtractor ext = identity_extractor(3);
  const PrototypeClassifier clf = axes_classifier();
  const std::vector<LabeledSample> samples = {{{1.0, 0.0, 0.0}, 0},
                                              {{0.0, 1.0, 0.0}, 1}};
  const SessionReport report = evaluate(ext, clf, samples, {0, 1, 2}, 0);
  CHECK_FALSE(report.acc_new.has_value());
  CHECK(report.acc_overall == doctest::Approx(1.0));
}

TEST_CASE("summarize derives the headline metrics") {
  const std::vector<SessionReport> reports = {
      report_with(0, 0.80, 0.80),
      report_with(1, 0.70, 0.74, 0.30),
      report_with(2, 0.60, 0.69, 0.25),
  };
  const ExperimentSummary s = summarize(reports);
  CHECK(s.base_acc == doctest::Approx(0.80));
  CHECK(s.final_overall == doctest::Approx(0.60));
  CHECK(s.final_old == doctest::Approx(0.69));
  REQUIRE(s.final_new.has_value());
  CHECK(*s.final_new == doctest::Approx(0.25));
  CHECK(s.average_acc == doctest::Approx(0.70));
  CHECK(s.pd == doctest::Approx(0.80 - 0.69));
  REQUIRE(s.harmonic.has_value());
  CHECK(*s.harmonic == doctest::Approx(2.0 * 0.69 * 0.25 / (0.69 + 0.25)));

  const ExperimentSummary base_only = summarize({report_with(0, 0.8, 0.8)});
  CHECK_FALSE(base_only.harmonic.has_value());
  CHECK(base_only.pd == doctest::Approx(0.0));
}

TEST_CASE("final improvement compares final sessions") {
  const ExperimentSummary ours = summarize({report_with(0, 0.9, 0.9),
                                            report_with(1, 0.56, 0.6, 0.4)});
  const ExperimentSummary baseline = summarize({report_with(0, 0.9, 0.9),
                                                report_with(1, 0.49, 0.5, 0.3)});
  CHECK(final_improvement(ours, baseline) == doctest::Approx(0.07));
  CHECK(final_improvement(baseline, ours) == doctest::Approx(-0.07));
}

namespace {

std::vector<MethodRow> sample_rows() {
  MethodRow a;
  a.name = "first";
  a.reports = {report_with(0, 0.8011, 0.8011), report_with(1, 0.56, 0.6, 0.4)};
  a.summary = summarize(a.reports);
  MethodRow b;
  b.name = "second";
  b.reports = {report_with(0, 0.82, 0.82), report_with(1, 0.49, 0.5, 0.3)};
  b.summary = summarize(b.reports);
  return {a, b};
}

}  // namespace

TEST_CASE("text table scales to percent with two decimals") {
  const std::string table =
      emit_table(sample_rows(), TableLayout::kSessions, TableFormat::kText);
  CHECK(table.find("80.11") != std::string::npos);
  CHECK(table.find("56.00") != std::string::npos);
  // first is the best final row: improvement 0.00 for it, 7.00 for second.
  CHECK(table.find("0.00") != std::string::npos);
  CHECK(table.find("7.00") != std::string::npos);
  CHECK(table.find("method") != std::string::npos);

  const std::string summary =
      emit_table(sample_rows(), TableLayout::kSummary, TableFormat::kText);
  CHECK(summary.find("harm") != std::string::npos);
  CHECK(summary.find("pd") != std::string::npos);
}

TEST_CASE("csv table keeps full-precision fractions") {
  const std::string csv =
      emit_table(sample_rows(), TableLayout::kSessions, TableFormat::kCsv);
  CHECK(csv.rfind("method,session_0,session_1,avg,final_improv\n", 0) == 0);
  CHECK(csv.find("0.8011") != std::string::npos);
  CHECK(csv.find("first") != std::string::npos);
}

TEST_CASE("json table parses and carries the summary fields") {
  const std::string text =
      emit_table(sample_rows(), TableLayout::kSummary, TableFormat::kJson);
  const nlohmann::json parsed = nlohmann::json::parse(text);
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0]["method"] == "first");
  CHECK(parsed[0]["old"].get<double>() == doctest::Approx(0.6));
  CHECK(parsed[0]["harmonic"].get<double>() ==
        doctest::Approx(2.0 * 0.6 * 0.4 / 1.0));
}

TEST_CASE("results csv includes identity and optional columns") {
  const std::string csv = results_csv(sample_rows(), 42);
  CHECK(csv.rfind("method,seed,session_0,session_1,avg,final_improv,base,old,"
                  "new,pd,harmonic\n",
                  0) == 0);
  CHECK(csv.find("first,42,") != std::string::npos);

  // A base-session-only run leaves the optional columns empty.
  MethodRow solo;
  solo.name = "solo";
  solo.reports = {report_with(0, 0.5, 0.5)};
  solo.summary = summarize(solo.reports);
  const std::string solo_csv = results_csv({solo}, 1);
  CHECK(solo_csv.find(",,") != std::string::npos);
}

TEST_CASE("table format names round trip") {
  TableFormat format = TableFormat::kText;
  CHECK(parse_table_format("json", format));
  CHECK(format == TableFormat::kJson);
  CHECK_FALSE(parse_table_format("yaml", format));
  CHECK(std::string(to_string(TableFormat::kCsv)) == "csv");
}
