#include "fscil/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fscil/checkpoint.hpp"
#include "fscil/config.hpp"
#include "fscil/gradcheck.hpp"
#include "fscil/io.hpp"
#include "fscil/metrics.hpp"
#include "fscil/protocol.hpp"

#ifndef FSCIL_VERSION
#define FSCIL_VERSION "unknown"
#endif

namespace fscil {

namespace {

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Options shared by the experiment-running subcommands, applied on top of
// the config file (flags win).
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::string out_dir = ".";
  std::string format = "text";
};

void add_common_options(CLI::App* cmd, CommonOptions& opts,
                        bool with_format = true) {
  cmd->add_option("--config", opts.config_path,
                  "key = value configuration file");
  cmd->add_option("--seed", opts.seed, "seed for data, splits, and training");
  cmd->add_option("--strategy", opts.strategy,
                  "incremental strategy: prototype|finetune_ce|spl");
  cmd->add_option("--gamma", opts.gamma, "variance-calibration weight");
  cmd->add_option("--alpha", opts.alpha, "prior-matching weight");
  cmd->add_option("--out", opts.out_dir, "output directory");
  if (with_format) {
    cmd->add_option("--format", opts.format, "results format: text|csv|json");
  }
}

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig config = opts.config_path.empty()
                         ? RunConfig{}
                         : load_config_file(opts.config_path);
  if (opts.seed.has_value()) apply_seed(config, *opts.seed);
  if (opts.strategy.has_value() &&
      !parse_strategy(*opts.strategy, config.train.strategy)) {
    throw ConfigError("strategy", "expected prototype|finetune_ce|spl, got '" +
                                      *opts.strategy + "'");
  }
  if (opts.gamma.has_value()) {
    if (!(*opts.gamma >= 0.0)) throw ConfigError("gamma", "must be >= 0");
    config.train.hyperparams.gamma = *opts.gamma;
  }
  if (opts.alpha.has_value()) {
    if (!(*opts.alpha >= 0.0)) throw ConfigError("alpha", "must be >= 0");
    config.train.hyperparams.alpha = *opts.alpha;
  }
  validate_config(config);
  return config;
}

TableFormat resolve_format(const std::string& text) {
  TableFormat format = TableFormat::kText;
  if (!parse_table_format(text, format)) {
    throw ConfigError("format", "expected text|csv|json, got '" + text + "'");
  }
  return format;
}

std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const RunConfig& config) {
  std::ostringstream out;
  out << "version " << FSCIL_VERSION << "\n";
  out << "timestamp " << utc_timestamp() << "\n";
  out << "command " << command << "\n";
  out << "config:\n" << config_to_text(config);
  atomic_write_file((dir / "manifest.txt").string(), out.str());
}

nlohmann::json row_json(const MethodRow& row, double best_final) {
  nlohmann::json j;
  j["method"] = row.name;
  nlohmann::json sessions = nlohmann::json::array();
  for (const SessionReport& r : row.reports) sessions.push_back(r.acc_overall);
  j["sessions"] = sessions;
  const ExperimentSummary& s = row.summary;
  j["base"] = s.base_acc;
  j["old"] = s.final_old;
  j["new"] = s.final_new.has_value() ? nlohmann::json(*s.final_new)
                                     : nlohmann::json(nullptr);
  j["avg"] = s.average_acc;
  j["pd"] = s.pd;
  j["harmonic"] = s.harmonic.has_value() ? nlohmann::json(*s.harmonic)
                                         : nlohmann::json(nullptr);
  j["final_overall"] = s.final_overall;
  j["final_improv"] = best_final - s.final_overall;
  return j;
}

void write_results(const std::filesystem::path& dir,
                   const std::vector<MethodRow>& rows, std::uint64_t seed,
                   TableFormat format) {
  std::string name = "results.txt";
  std::string content;
  switch (format) {
    case TableFormat::kText:
      content = emit_table(rows, TableLayout::kSessions, TableFormat::kText) +
                "\n" +
                emit_table(rows, TableLayout::kSummary, TableFormat::kText);
      break;
    case TableFormat::kCsv:
      name = "results.csv";
      content = results_csv(rows, seed);
      break;
    case TableFormat::kJson: {
      name = "results.json";
      double best = rows.front().summary.final_overall;
      for (const MethodRow& row : rows) {
        best = std::max(best, row.summary.final_overall);
      }
      nlohmann::json j;
      j["seed"] = seed;
      j["methods"] = nlohmann::json::array();
      for (const MethodRow& row : rows) {
        j["methods"].push_back(row_json(row, best));
      }
      content = j.dump(2) + "\n";
      break;
    }
  }
  atomic_write_file((dir / name).string(), content);
}

void print_tables(const std::vector<MethodRow>& rows) {
  std::cout << emit_table(rows, TableLayout::kSessions, TableFormat::kText)
            << "\n"
            << emit_table(rows, TableLayout::kSummary, TableFormat::kText);
}

int cmd_run(const CommonOptions& opts) {
  const RunConfig config = resolve_config(opts);
  const TableFormat format = resolve_format(opts.format);
  const std::filesystem::path dir = prepare_out_dir(opts.out_dir);

  const SyntheticDataset data = generate_synthetic(config.data);
  const ExperimentResult result =
      run_experiment(data, config.plan, config.train);
  const std::vector<MethodRow> rows = {
      {to_string(config.train.strategy), result.reports, result.summary}};

  print_tables(rows);
  write_results(dir, rows, config.train.seed, format);
  save_checkpoint((dir / "model.ckpt").string(), result.state);
  write_manifest(dir, "run", config);
  return 0;
}

int cmd_compare(const CommonOptions& opts) {
  const RunConfig config = resolve_config(opts);
  const TableFormat format = resolve_format(opts.format);
  const std::filesystem::path dir = prepare_out_dir(opts.out_dir);

  const SyntheticDataset data = generate_synthetic(config.data);
  const std::vector<NamedResult> results =
      compare_methods(data, config.plan, config.train);
  std::vector<MethodRow> rows;
  for (const NamedResult& named : results) {
    rows.push_back(
        {named.name, named.result.reports, named.result.summary});
  }

  print_tables(rows);
  write_results(dir, rows, config.train.seed, format);
  write_manifest(dir, "compare", config);
  return 0;
}

int cmd_sweep(const CommonOptions& opts) {
  const RunConfig config = resolve_config(opts);
  const std::filesystem::path dir = prepare_out_dir(opts.out_dir);

  const SyntheticDataset data = generate_synthetic(config.data);
  const std::vector<SweepCell> cells =
      sweep_hyperparams(data, config.plan, config.train, config.sweep_gammas,
                        config.sweep_alphas);

  std::ostringstream csv;
  csv << "gamma,alpha,final_acc\n";
  for (const SweepCell& cell : cells) {
    csv << format_double(cell.gamma) << "," << format_double(cell.alpha) << ","
        << format_double(cell.final_overall) << "\n";
  }
  atomic_write_file((dir / "sweep.csv").string(), csv.str());

  std::cout << "gamma      alpha      final_acc\n";
  for (const SweepCell& cell : cells) {
    char line[96];
    std::snprintf(line, sizeof(line), "%-10g %-10g %.2f\n", cell.gamma,
                  cell.alpha, cell.final_overall * 100.0);
    std::cout << line;
  }
  write_manifest(dir, "sweep", config);
  return 0;
}

int cmd_export(const CommonOptions& opts, const std::string& out_file,
               const std::string& split) {
  if (split != "train" && split != "test" && split != "all") {
    throw ConfigError("split", "expected train|test|all, got '" + split + "'");
  }
  const RunConfig config = resolve_config(opts);
  const SyntheticDataset data = generate_synthetic(config.data);
  const std::vector<SessionDataset> sessions =
      split_sessions(data, config.plan);
  const TrainedState state = train_base(sessions.front(), config.train);

  EmbeddingTable table;
  table.dim = config.train.feature_dim;
  const auto add_rows = [&](const std::vector<LabeledSample>& samples) {
    for (const LabeledSample& sample : samples) {
      table.rows.push_back(
          {extract_features(state.extractor, sample.input), sample.label});
    }
  };
  if (split != "test") add_rows(data.train);
  if (split != "train") add_rows(data.test);
  export_embeddings_csv(out_file, table);

  std::ostringstream meta;
  meta << "version " << FSCIL_VERSION << "\n";
  meta << "timestamp " << utc_timestamp() << "\n";
  meta << "command export\n";
  meta << "split " << split << "\n";
  meta << "rows " << table.rows.size() << "\n";
  meta << "dim " << table.dim << "\n";
  meta << "config:\n" << config_to_text(config);
  atomic_write_file(out_file + ".meta", meta.str());
  std::cout << "wrote " << table.rows.size() << " embeddings to " << out_file
            << "\n";
  return 0;
}

int cmd_gradcheck(std::size_t cases, std::uint64_t seed,
                  const std::string& family, bool inject_corruption) {
  std::vector<LossFamily> families;
  if (family == "all") {
    families.assign(std::begin(kAllLossFamilies), std::end(kAllLossFamilies));
  } else {
    bool found = false;
    for (LossFamily f : kAllLossFamilies) {
      if (family == to_string(f)) {
        families.push_back(f);
        found = true;
      }
    }
    if (!found) {
      throw ConfigError("family", "unknown loss family '" + family + "'");
    }
  }
  bool all_passed = true;
  for (LossFamily f : families) {
    const GradCheckReport report =
        grad_check(f, cases, seed, inject_corruption);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%-22s cases=%zu resampled=%zu max_rel_err=%.3e %s\n",
                  to_string(f), report.cases_run, report.cases_resampled,
                  report.max_rel_error, report.passed ? "PASS" : "FAIL");
    std::cout << line;
    all_passed = all_passed && report.passed;
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"few-shot class-incremental learning testbed"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  CLI::App* run = app.add_subcommand(
      "run", "train one configuration through all sessions");
  add_common_options(run, run_opts);

  CommonOptions compare_opts;
  CLI::App* compare = app.add_subcommand(
      "compare", "run the reference methods side by side");
  add_common_options(compare, compare_opts);

  CommonOptions sweep_opts;
  CLI::App* sweep =
      app.add_subcommand("sweep", "grid-run the hyperparameter weights");
  add_common_options(sweep, sweep_opts, /*with_format=*/false);

  CommonOptions export_opts;
  std::string export_file = "embeddings.csv";
  std::string export_split = "all";
  CLI::App* exp = app.add_subcommand(
      "export", "train the base session and export feature embeddings");
  add_common_options(exp, export_opts, /*with_format=*/false);
  exp->add_option("--file", export_file, "output CSV path");
  exp->add_option("--split", export_split, "train|test|all");

  std::size_t gc_cases = 100;
  std::uint64_t gc_seed = 1;
  std::string gc_family = "all";
  bool gc_inject = false;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "compare analytic gradients against finite differences");
  gradcheck->add_option("--cases", gc_cases, "configurations per loss family");
  gradcheck->add_option("--seed", gc_seed, "configuration seed");
  gradcheck->add_option("--family", gc_family,
                        "loss family name, or 'all'");
  gradcheck->add_flag("--inject-corruption", gc_inject,
                      "corrupt one analytic gradient per case; the check "
                      "must then fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (compare->parsed()) return cmd_compare(compare_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (exp->parsed()) {
      return cmd_export(export_opts, export_file, export_split);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_cases, gc_seed, gc_family, gc_inject);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fscil
