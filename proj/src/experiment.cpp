#include "hbd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hbd/binary_io.hpp"
#include "hbd/error.hpp"
#include "hbd/synthetic.hpp"

namespace hbd {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

bool partition_cached(const fs::path& dir, const std::string& subset, Partition p) {
  return fs::exists(dir / cache_file_name(subset, p));
}

std::string report_stem(const EvalReport& r) { return r.subset + "_" + std::string(to_string(r.partition)); }

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_hash(const fs::path& file) {
  const auto bytes = read_file_bytes(file.string());
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// ---------------------------------------------------------------- ingest

SubsetStats stats_of(const LabeledDataset& dataset) {
  return {dataset.subset_name, dataset.partition, dataset.subject_ids.size(), class_stats(dataset)};
}

std::string stats_csv(std::span<const SubsetStats> rows) {
  std::string out = "subset,partition,n_subjects,n_segments,percent_beat\n";
  for (const auto& r : rows) {
    out += r.subset + "," + std::string(to_string(r.partition)) + "," + std::to_string(r.n_subjects) + "," +
           std::to_string(r.stats.n_segments) + "," + fmt("%.2f", r.stats.percent_beat) + "\n";
  }
  return out;
}

std::vector<SubsetStats> ingest_manifest(const fs::path& manifest, const fs::path& out_dir, const RunConfig& config,
                                         const std::optional<std::string>& only_subset) {
  const auto entries = load_manifest(manifest);
  fs::create_directories(out_dir);
  std::vector<SubsetStats> rows;

  for (const auto& subset : all_subsets()) {
    if (only_subset && *only_subset != subset) continue;
    std::vector<IngestedRecord> records;
    for (const auto& entry : entries) {
      if (subset_of(entry.dataset_tag) != subset) continue;
      auto rec = load_entry(entry, config.beat_codes);
      // Only the first max_duration seconds are ever segmented.
      const auto keep = static_cast<std::size_t>(std::ceil(config.max_duration * rec.record.fs)) + 1;
      if (rec.record.samples.size() > keep) {
        rec.record.samples.resize(keep);
        rec.record.samples.shrink_to_fit();
        std::erase_if(rec.beats, [keep](std::int64_t b) { return b >= static_cast<std::int64_t>(keep); });
      }
      records.push_back(std::move(rec));
    }
    if (records.empty()) continue;
    const auto [train, test] = build_subset(subset, records, config.seed, config.train_fraction, config.max_duration);
    for (const auto* ds : {&train, &test}) {
      save_cache(*ds, out_dir / cache_file_name(subset, ds->partition));
      rows.push_back(stats_of(*ds));
    }
  }
  if (only_subset && rows.empty()) {
    throw Error(ErrorCode::MalformedManifest, "manifest has no records for subset " + *only_subset);
  }
  write_text(out_dir / "stats.csv", stats_csv(rows));
  return rows;
}

std::vector<SubsetStats> build_synthetic(const std::string& subset, std::size_t train_subjects, std::size_t test_subjects,
                                         double seconds_per_subject, const fs::path& out_dir, std::uint64_t seed) {
  fs::create_directories(out_dir);
  std::vector<SubsetStats> rows;
  const auto train = synthetic_dataset(subset, Partition::Train, train_subjects, seconds_per_subject, seed);
  const auto test = synthetic_dataset(subset, Partition::Test, test_subjects, seconds_per_subject, seed + 1);
  for (const auto* ds : {&train, &test}) {
    save_cache(*ds, out_dir / cache_file_name(subset, ds->partition));
    rows.push_back(stats_of(*ds));
  }
  write_text(out_dir / "stats.csv", stats_csv(rows));
  return rows;
}

LabeledDataset load_partition(const fs::path& cache_dir, const std::string& subset, Partition partition) {
  const auto path = cache_dir / cache_file_name(subset, partition);
  if (!fs::exists(path)) throw Error(ErrorCode::MissingCache, path.string());
  return load_cache(path);
}

// ------------------------------------------------------------ experiments

EvalReport evaluate_model(const NetworkConfig& config, const Params& params, const LabeledDataset& dataset,
                          const BootstrapOptions& bootstrap) {
  if (dataset.segments.empty()) throw Error(ErrorCode::EmptyDataset, dataset.subset_name);
  const auto predicted = predict_labels(config, params, dataset);
  const auto truth = true_labels(dataset);
  return evaluate_predictions(dataset.subset_name, dataset.partition, predicted, truth, bootstrap);
}

void write_report(const fs::path& dir, const EvalReport& report) {
  write_text(dir / (report_stem(report) + ".csv"), report_csv(report));
  write_text(dir / (report_stem(report) + ".json"), report_json(report));
}

std::string mcc_chart_svg(std::span<const ChartBar> bars, const std::string& title) {
  constexpr double kWidthPerBar = 46.0, kGap = 30.0, kLeft = 70.0, kTop = 50.0, kPlotH = 300.0, kBottom = 110.0;
  std::vector<std::string> groups;
  for (const auto& b : bars) {
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);
  }
  const double width = kLeft + 20.0 + static_cast<double>(bars.size()) * kWidthPerBar + static_cast<double>(groups.size()) * kGap;
  const double height = kTop + kPlotH + kBottom;
  // MCC axis spans [min(0, lowest), 1]
  double y_min = 0.0;
  for (const auto& b : bars) y_min = std::min(y_min, std::floor(b.low * 10.0) / 10.0);
  auto y_of = [&](double v) { return kTop + kPlotH * (1.0 - (v - y_min) / (1.0 - y_min)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\"" << fmt("%.0f", height)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt("%.1f", width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n";
  for (double v = y_min; v <= 1.0 + 1e-9; v += 0.1) {
    const double y = y_of(v);
    os << "<line x1=\"" << kLeft << "\" x2=\"" << fmt("%.1f", width - 10) << "\" y1=\"" << fmt("%.1f", y) << "\" y2=\""
       << fmt("%.1f", y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt("%.1f", y + 4) << "\" text-anchor=\"end\">" << fmt("%.1f", v) << "</text>\n";
  }
  os << "<text transform=\"translate(18," << fmt("%.1f", kTop + kPlotH / 2) << ") rotate(-90)\" text-anchor=\"middle\">MCC (90% CI)</text>\n";

  static const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  std::map<std::string, std::size_t> color_of;
  double x = kLeft + 10.0;
  for (const auto& g : groups) {
    const double group_start = x;
    for (const auto& b : bars) {
      if (b.group != g) continue;
      const auto color = color_of.try_emplace(b.label, color_of.size() % 6).first->second;
      const double y0 = y_of(std::max(0.0, y_min));
      const double y1 = y_of(b.value);
      os << "<rect x=\"" << fmt("%.1f", x + 4) << "\" y=\"" << fmt("%.1f", std::min(y0, y1)) << "\" width=\""
         << fmt("%.1f", kWidthPerBar - 8) << "\" height=\"" << fmt("%.1f", std::abs(y0 - y1)) << "\" fill=\"" << kColors[color]
         << "\"><title>" << xml_escape(b.group + " " + b.label) << fmt(": %.3f", b.value) << fmt(" [%.3f,", b.low)
         << fmt(" %.3f]", b.high) << "</title></rect>\n";
      const double cx = x + kWidthPerBar / 2;
      os << "<line x1=\"" << fmt("%.1f", cx) << "\" x2=\"" << fmt("%.1f", cx) << "\" y1=\"" << fmt("%.1f", y_of(b.low))
         << "\" y2=\"" << fmt("%.1f", y_of(b.high)) << "\" stroke=\"black\"/>\n";
      for (double v : {b.low, b.high}) {
        os << "<line x1=\"" << fmt("%.1f", cx - 6) << "\" x2=\"" << fmt("%.1f", cx + 6) << "\" y1=\"" << fmt("%.1f", y_of(v))
           << "\" y2=\"" << fmt("%.1f", y_of(v)) << "\" stroke=\"black\"/>\n";
      }
      os << "<text transform=\"translate(" << fmt("%.1f", cx + 3) << "," << fmt("%.1f", kTop + kPlotH + 8)
         << ") rotate(60)\">" << xml_escape(b.label) << "</text>\n";
      x += kWidthPerBar;
    }
    os << "<text x=\"" << fmt("%.1f", (group_start + x) / 2) << "\" y=\"" << fmt("%.1f", height - 12)
       << "\" text-anchor=\"middle\" font-weight=\"bold\">" << xml_escape(g) << "</text>\n";
    x += kGap;
  }
  os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft << "\" y1=\"" << kTop << "\" y2=\"" << kTop + kPlotH
     << "\" stroke=\"black\"/>\n";
  os << "</svg>\n";
  return os.str();
}

namespace {

std::string bar_label(int experiment, Partition p) {
  return "Exp " + std::to_string(experiment) + " " + std::string(to_string(p));
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
  if (spec.id < 1 || spec.id > 3) throw Error(ErrorCode::InvalidConfig, "experiment id must be 1, 2 or 3");
  fs::create_directories(spec.out_dir / "reports");
  RunConfig config = spec.config;
  ExperimentOutcome outcome;
  ordered_json run;
  run["experiment"] = spec.id;
  run["seed"] = config.seed;
  run["source_subset"] = spec.source_subset;
  ordered_json caches = ordered_json::object();
  auto note_cache = [&](const std::string& subset, Partition p) {
    const auto name = cache_file_name(subset, p);
    caches[name] = content_hash(spec.cache_dir / name);
  };

  std::vector<ChartBar> bars;
  auto record = [&](const EvalReport& r) {
    write_report(spec.out_dir / "reports", r);
    const auto& m = r[Metric::Mcc];
    bars.push_back({r.subset, bar_label(spec.id, r.partition), m.mean, m.ci_low, m.ci_high});
    outcome.reports.push_back(r);
  };

  // Resolve the model: trained here (1) or loaded (2, 3).
  Params base;
  if (spec.id == 1) {
    const auto train_set = load_partition(spec.cache_dir, spec.source_subset, Partition::Train);
    const auto test_set = load_partition(spec.cache_dir, spec.source_subset, Partition::Test);
    note_cache(spec.source_subset, Partition::Train);
    note_cache(spec.source_subset, Partition::Test);
    TrainConfig tc = config.train;
    tc.freeze_conv = false;
    const auto result = train(train_set, tc);
    base = result.params;
    const auto ckpt = spec.out_dir / "exp1_model.hbdl";
    save_checkpoint(base, tc.network, ckpt);
    write_text(spec.out_dir / "exp1_train_log.csv", history_csv(result.history));
    outcome.checkpoints.push_back(ckpt);
    for (const auto* ds : {&train_set, &test_set}) record(evaluate_model(tc.network, base, *ds, config.bootstrap));
  } else {
    if (!spec.checkpoint || !fs::exists(*spec.checkpoint)) {
      throw Error(ErrorCode::MissingCheckpoint, spec.checkpoint ? spec.checkpoint->string() : "no --checkpoint given");
    }
    auto [params, net] = load_checkpoint(*spec.checkpoint);
    base = std::move(params);
    config.train.network = net;
    run["base_checkpoint"] = content_hash(*spec.checkpoint);

    std::vector<std::string> targets = spec.targets;
    const bool explicit_targets = !targets.empty();
    if (!explicit_targets) {
      for (const auto& s : all_subsets()) {
        if (s != spec.source_subset) targets.push_back(s);
      }
    }
    for (const auto& subset : targets) {
      const bool need_train = spec.id == 3;
      const bool present = partition_cached(spec.cache_dir, subset, Partition::Test) &&
                           (!need_train || partition_cached(spec.cache_dir, subset, Partition::Train));
      if (!present) {
        if (explicit_targets) {
          throw Error(ErrorCode::MissingCache, "caches for " + subset + " not found in " + spec.cache_dir.string());
        }
        outcome.skipped_targets.push_back(subset);
        continue;
      }
      const auto test_set = load_partition(spec.cache_dir, subset, Partition::Test);
      if (spec.id == 2) {
        note_cache(subset, Partition::Test);
        record(evaluate_model(net, base, test_set, config.bootstrap));
        continue;
      }
      const auto train_set = load_partition(spec.cache_dir, subset, Partition::Train);
      note_cache(subset, Partition::Train);
      note_cache(subset, Partition::Test);
      const auto result = transfer(base, net, train_set, config.train);
      const auto ckpt = spec.out_dir / (subset + "_transfer.hbdl");
      save_checkpoint(result.params, net, ckpt);
      write_text(spec.out_dir / (subset + "_train_log.csv"), history_csv(result.history));
      outcome.checkpoints.push_back(ckpt);
      for (const auto* ds : {&train_set, &test_set}) record(evaluate_model(net, result.params, *ds, config.bootstrap));
    }
  }

  run["network"] = ordered_json::parse(network_config_json(config.train.network));
  run["caches"] = caches;
  ordered_json reports = ordered_json::array();
  std::string all_csv = "subset,partition,n_segments,metric,point,mean,ci_low,ci_high\n";
  for (const auto& r : outcome.reports) {
    reports.push_back("reports/" + report_stem(r) + ".json");
    all_csv += report_csv(r, false);
  }
  run["reports"] = reports;
  run["skipped_targets"] = outcome.skipped_targets;
  write_text(spec.out_dir / "run.json", run.dump(2) + "\n");
  write_text(spec.out_dir / "run_config.ini", to_config_text(config));
  write_text(spec.out_dir / "reports.csv", all_csv);
  write_text(spec.out_dir / "mcc.svg", mcc_chart_svg(bars, "Experiment " + std::to_string(spec.id) + ": MCC with 90% CI"));
  return outcome;
}

// ---------------------------------------------------------------- report

std::string consolidate_reports(const fs::path& report_dir) {
  struct Run {
    fs::path dir;
    int experiment = 0;
    ordered_json meta;
    std::vector<EvalReport> reports;
  };
  std::vector<Run> runs;
  if (fs::exists(report_dir)) {
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(report_dir)) {
      if (e.is_regular_file() && e.path().filename() == "run.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
      Run run;
      run.dir = p.parent_path();
      try {
        run.meta = ordered_json::parse(read_text_file(p));
        run.experiment = run.meta.at("experiment").get<int>();
        for (const auto& rel : run.meta.at("reports")) {
          run.reports.push_back(report_from_json(read_text_file(run.dir / rel.get<std::string>())));
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
      }
      runs.push_back(std::move(run));
    }
  }
  if (runs.empty()) throw Error(ErrorCode::NoReportsFound, report_dir.string());

  auto cell = [](const MetricSummary& m, bool percent) {
    const double k = percent ? 100.0 : 1.0;
    if (percent) return fmt("%.1f%%", m.point * k) + fmt(" [%.1f, ", m.ci_low * k) + fmt("%.1f]", m.ci_high * k);
    return fmt("%.3f", m.point) + fmt(" [%.3f, ", m.ci_low) + fmt("%.3f]", m.ci_high);
  };

  std::ostringstream md;
  std::string csv = "experiment,subset,partition,n_segments,metric,point,mean,ci_low,ci_high\n";
  std::vector<ChartBar> bars;
  md << "# Heart-beat detection results\n\n";

  // Dataset sizes from any stats.csv found under the report directory.
  std::set<fs::path> stats_files;
  for (const auto& e : fs::recursive_directory_iterator(report_dir)) {
    if (e.is_regular_file() && e.path().filename() == "stats.csv") stats_files.insert(e.path());
  }
  if (!stats_files.empty()) {
    md << "## Dataset sizes\n\n";
    for (const auto& f : stats_files) {
      md << "`" << fs::relative(f, report_dir).string() << "`\n\n| subset | partition | N | segments | % BEAT |\n|---|---|---|---|---|\n";
      std::istringstream is(read_text_file(f));
      std::string line;
      std::getline(is, line);
      while (std::getline(is, line)) {
        std::string out = "| ";
        for (char c : line) out += c == ',' ? std::string(" | ") : std::string(1, c);
        md << out << " |\n";
      }
      md << "\n";
    }
  }

  for (const auto& run : runs) {
    md << "## Experiment " << run.experiment << " (`" << fs::relative(run.dir, report_dir).string() << "`)\n\n";
    md << "| subset | partition | segments | MCC | +p | Se | F1 |\n|---|---|---|---|---|---|---|\n";
    for (const auto& r : run.reports) {
      md << "| " << r.subset << " | " << to_string(r.partition) << " | " << r.n_segments << " | " << cell(r[Metric::Mcc], false)
         << " | " << cell(r[Metric::Precision], true) << " | " << cell(r[Metric::Sensitivity], true) << " | "
         << cell(r[Metric::F1], false) << " |\n";
      for (const auto& m : r.metrics) {
        csv += std::to_string(run.experiment) + "," + r.subset + "," + std::string(to_string(r.partition)) + "," +
               std::to_string(r.n_segments) + "," + std::string(to_string(m.metric)) + fmt(",%.6f", m.point) +
               fmt(",%.6f", m.mean) + fmt(",%.6f", m.ci_low) + fmt(",%.6f\n", m.ci_high);
      }
      const auto& m = r[Metric::Mcc];
      bars.push_back({r.subset, bar_label(run.experiment, r.partition), m.mean, m.ci_low, m.ci_high});
    }
    if (!run.meta.value("skipped_targets", ordered_json::array()).empty()) {
      md << "\nSkipped (no caches): " << run.meta["skipped_targets"].dump() << "\n";
    }
    md << "\nProvenance: seed " << run.meta.value("seed", std::uint64_t{0}) << ", network `" << run.meta["network"].dump() << "`\n";
    if (run.meta.contains("caches")) md << "\nCache hashes: `" << run.meta["caches"].dump() << "`\n";
    if (fs::exists(run.dir / "run_config.ini")) {
      md << "\n```ini\n" << read_text_file(run.dir / "run_config.ini") << "```\n";
    }
    md << "\n";
  }

  const auto text = md.str();
  write_text(report_dir / "summary.md", text);
  write_text(report_dir / "summary.csv", csv);
  write_text(report_dir / "summary.svg", mcc_chart_svg(bars, "MCC with 90% CI per subset and partition"));
  return text;
}

}  // namespace hbd
