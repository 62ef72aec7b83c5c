// hbd: heart-beat detection pipeline driver.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbd/error.hpp"
#include "hbd/experiment.hpp"

namespace {

using namespace hbd;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_run_config() : load_run_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run configuration (key=value sections)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides [run] seed");
}

void print_stats(const std::vector<SubsetStats>& rows) { std::cout << stats_csv(rows); }

void print_report(const EvalReport& r) { std::cout << report_csv(r); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heart-beat detection in ECG segments with a 1D CNN"};
  app.require_subcommand(1);
  Common common;

  // ingest
  std::string manifest, out, cache_dir, checkpoint, subset, partition = "Test";
  auto* ingest = app.add_subcommand("ingest", "decode every manifest record into per-subset Train/Test caches");
  add_common(ingest, common);
  ingest->add_option("--manifest", manifest, "manifest file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "cache directory")->required();

  // build-dataset
  bool synthetic = false;
  std::size_t train_subjects = 4, test_subjects = 2;
  double seconds = 60.0;
  auto* build = app.add_subcommand("build-dataset", "build the caches of one subset");
  add_common(build, common);
  build->add_option("--manifest", manifest, "manifest file")->check(CLI::ExistingFile);
  build->add_flag("--synthetic", synthetic, "generate synthetic ECG instead of reading a manifest");
  build->add_option("--subset", subset, "subset name")->required();
  build->add_option("--out", out, "cache directory")->required();
  build->add_option("--train-subjects", train_subjects, "synthetic Train subjects")->capture_default_str();
  build->add_option("--test-subjects", test_subjects, "synthetic Test subjects")->capture_default_str();
  build->add_option("--seconds", seconds, "synthetic seconds per subject")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train from scratch on a subset's Train partition");
  add_common(train_cmd, common);
  train_cmd->add_option("--cache-dir", cache_dir, "cache directory")->required();
  train_cmd->add_option("--subset", subset, "subset")->default_val(kSourceSubset);
  train_cmd->add_option("--out", out, "output directory")->required();

  // transfer
  auto* transfer_cmd = app.add_subcommand("transfer", "retrain only the FC part of a checkpoint on a subset's Train partition");
  add_common(transfer_cmd, common);
  transfer_cmd->add_option("--cache-dir", cache_dir, "cache directory")->required();
  transfer_cmd->add_option("--checkpoint", checkpoint, "base checkpoint")->required();
  transfer_cmd->add_option("--subset", subset, "target subset")->required();
  transfer_cmd->add_option("--out", out, "output directory")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on one partition");
  add_common(evaluate, common);
  evaluate->add_option("--cache-dir", cache_dir, "cache directory")->required();
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint")->required();
  evaluate->add_option("--subset", subset, "subset")->default_val(kSourceSubset);
  evaluate->add_option("--partition", partition, "Train or Test")->capture_default_str();
  evaluate->add_option("--out", out, "report directory (prints only when omitted)");

  // experiment
  int id = 1;
  std::string source = kSourceSubset;
  std::vector<std::string> targets;
  auto* experiment = app.add_subcommand("experiment", "run experiment 1, 2 or 3");
  add_common(experiment, common);
  experiment->add_option("--id", id, "experiment")->required()->check(CLI::Range(1, 3));
  experiment->add_option("--cache-dir", cache_dir, "cache directory")->required();
  experiment->add_option("--out", out, "run directory")->required();
  experiment->add_option("--checkpoint", checkpoint, "experiment-1 checkpoint (experiments 2 and 3)");
  experiment->add_option("--subset", targets, "target subsets (experiments 2 and 3; default: all cached)");
  experiment->add_option("--source", source, "source subset")->capture_default_str();

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "merge run directories into summary.md / summary.csv / summary.svg");
  report->add_option("dir", report_dir, "directory holding run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) {
      print_stats(ingest_manifest(manifest, out, resolve_config(common)));
    } else if (*build) {
      const auto cfg = resolve_config(common);
      if (synthetic == !manifest.empty()) {
        std::cerr << "build-dataset: give exactly one of --manifest or --synthetic\n";
        return kUsage;
      }
      print_stats(synthetic ? build_synthetic(subset, train_subjects, test_subjects, seconds, out, cfg.seed)
                            : ingest_manifest(manifest, out, cfg, subset));
    } else if (*train_cmd) {
      const auto cfg = resolve_config(common);
      const auto ds = load_partition(cache_dir, subset, Partition::Train);
      const auto result = train(ds, cfg.train);
      fs::create_directories(out);
      save_checkpoint(result.params, cfg.train.network, fs::path(out) / "model.hbdl");
      write_text(fs::path(out) / "train_log.csv", history_csv(result.history));
      write_text(fs::path(out) / "run_config.ini", to_config_text(cfg));
      std::cout << history_csv(result.history);
    } else if (*transfer_cmd) {
      auto cfg = resolve_config(common);
      const auto [base, net] = load_checkpoint(checkpoint);
      cfg.train.network = net;
      const auto ds = load_partition(cache_dir, subset, Partition::Train);
      const auto result = transfer(base, net, ds, cfg.train);
      fs::create_directories(out);
      save_checkpoint(result.params, net, fs::path(out) / (subset + "_transfer.hbdl"));
      write_text(fs::path(out) / (subset + "_train_log.csv"), history_csv(result.history));
      write_text(fs::path(out) / "run_config.ini", to_config_text(cfg));
      std::cout << history_csv(result.history);
    } else if (*evaluate) {
      const auto cfg = resolve_config(common);
      const auto [params, net] = load_checkpoint(checkpoint);
      const auto ds = load_partition(cache_dir, subset, parse_partition(partition));
      const auto r = evaluate_model(net, params, ds, cfg.bootstrap);
      if (!out.empty()) write_report(out, r);
      print_report(r);
    } else if (*experiment) {
      ExperimentSpec spec;
      spec.id = id;
      spec.source_subset = source;
      spec.targets = targets;
      spec.config = resolve_config(common);
      spec.cache_dir = cache_dir;
      spec.out_dir = out;
      if (!checkpoint.empty()) spec.checkpoint = checkpoint;
      const auto outcome = run_experiment(spec);
      for (const auto& r : outcome.reports) std::cout << report_csv(r, &r == &outcome.reports.front());
      for (const auto& s : outcome.skipped_targets) std::cerr << "skipped " << s << ": no cache\n";
    } else if (*report) {
      std::cout << consolidate_reports(report_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::NonFiniteLoss: return kNumeric;
      case ErrorCode::InvalidConfig: return kUsage;
      default: return kData;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
