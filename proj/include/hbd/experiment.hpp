#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hbd/dataset.hpp"
#include "hbd/metrics.hpp"
#include "hbd/run_config.hpp"
#include "hbd/trainer.hpp"

namespace hbd {

namespace fs = std::filesystem;

inline const std::string kSourceSubset = "NormalSinus+LongTerm";

// ---------------------------------------------------------------- ingest

struct SubsetStats {
  std::string subset;
  Partition partition = Partition::Train;
  std::size_t n_subjects = 0;
  ClassStats stats;
};

/// subset,partition,n_subjects,n_segments,percent_beat
std::string stats_csv(std::span<const SubsetStats> rows);
SubsetStats stats_of(const LabeledDataset& dataset);

/// Decodes every manifest record, builds the Train/Test caches of each subset
/// present (or only `only_subset`) and writes stats.csv next to them. Any
/// record failure aborts the run.
std::vector<SubsetStats> ingest_manifest(const fs::path& manifest, const fs::path& out_dir, const RunConfig& config,
                                         const std::optional<std::string>& only_subset = std::nullopt);

/// Writes the Train/Test caches of generated data for one subset.
std::vector<SubsetStats> build_synthetic(const std::string& subset, std::size_t train_subjects, std::size_t test_subjects,
                                         double seconds_per_subject, const fs::path& out_dir, std::uint64_t seed);

LabeledDataset load_partition(const fs::path& cache_dir, const std::string& subset, Partition partition);

// ------------------------------------------------------------ experiments

struct ExperimentSpec {
  int id = 1;
  std::string source_subset = kSourceSubset;
  /// Experiments 2 and 3; empty means every non-source subset whose caches exist.
  std::vector<std::string> targets;
  RunConfig config = default_run_config();
  fs::path cache_dir;
  fs::path out_dir;
  /// Experiment-1 checkpoint for experiments 2 and 3.
  std::optional<fs::path> checkpoint;
};

struct ExperimentOutcome {
  std::vector<EvalReport> reports;
  std::vector<fs::path> checkpoints;
  std::vector<std::string> skipped_targets;  // no cache present
};

/// Runs one experiment and writes into out_dir:
///   run.json          experiment id, seed, network config, cache hashes
///   run_config.ini    resolved configuration
///   reports/*.csv|json one EvalReport per subset/partition
///   reports.csv       all rows
///   mcc.svg           MCC bars with CI whiskers
///   *.hbdl, *_train_log.csv for experiments that train
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

EvalReport evaluate_model(const NetworkConfig& config, const Params& params, const LabeledDataset& dataset,
                          const BootstrapOptions& bootstrap);

/// Writes <dir>/<subset>_<partition>.csv and .json.
void write_report(const fs::path& dir, const EvalReport& report);

struct ChartBar {
  std::string group;  // subset
  std::string label;  // e.g. "Exp 3 Test"
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Grouped bar chart of MCC with CI whiskers.
std::string mcc_chart_svg(std::span<const ChartBar> bars, const std::string& title);

/// Merges every run.json under `report_dir` into summary.md and summary.csv
/// (dataset sizes, then one metrics table per run) and returns the Markdown.
std::string consolidate_reports(const fs::path& report_dir);

std::string content_hash(const fs::path& file);
void write_text(const fs::path& path, const std::string& text);
std::string read_text_file(const fs::path& path);

}  // namespace hbd
