#include "hbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include <json.hpp>

#include "hbd/error.hpp"
#include "hbd/rng.hpp"

namespace hbd {

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Label::Beat;
    const bool t = truth[i] == Label::Beat;
    if (p && t) ++c.tp;
    else if (!p && !t) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

double mcc(const ConfusionCounts& c) noexcept {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

PrecisionSensitivityF1 precision_sensitivity_f1(const ConfusionCounts& c) noexcept {
  PrecisionSensitivityF1 r;
  const double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) r.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.sensitivity = tp / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.sensitivity > 0.0) r.f1 = 2.0 * r.precision * r.sensitivity / (r.precision + r.sensitivity);
  return r;
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::Mcc: return "MCC";
    case Metric::Precision: return "+p";
    case Metric::Sensitivity: return "Se";
    case Metric::F1: return "F1";
  }
  return "?";
}

double metric_value(const ConfusionCounts& c, Metric m) noexcept {
  if (m == Metric::Mcc) return mcc(c);
  const auto psf = precision_sensitivity_f1(c);
  switch (m) {
    case Metric::Precision: return psf.precision;
    case Metric::Sensitivity: return psf.sensitivity;
    default: return psf.f1;
  }
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of nothing");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

void check_bootstrap(std::span<const Label> predicted, std::span<const Label> truth, const BootstrapOptions& o) {
  if (predicted.empty() || truth.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap over no samples");
  if (predicted.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "prediction/label length");
  if (o.repetitions < 2) throw Error(ErrorCode::InvalidConfig, "bootstrap needs at least 2 repetitions");
  if (!(o.fraction > 0.0 && o.fraction <= 1.0)) throw Error(ErrorCode::InvalidConfig, "bootstrap fraction must lie in (0, 1]");
  if (!(o.confidence > 0.0 && o.confidence < 1.0)) throw Error(ErrorCode::InvalidConfig, "confidence must lie in (0, 1)");
}

BootstrapResult summarize(std::vector<double> values, double confidence) {
  BootstrapResult r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  r.ci_low = std::min(quantile_sorted(values, (1.0 - confidence) / 2.0), r.mean);
  r.ci_high = std::max(quantile_sorted(values, (1.0 + confidence) / 2.0), r.mean);
  return r;
}

}  // namespace

std::array<BootstrapResult, 4> bootstrap_all(std::span<const Label> predicted, std::span<const Label> truth,
                                             const BootstrapOptions& o) {
  check_bootstrap(predicted, truth, o);
  const std::size_t n = predicted.size();
  const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.fraction * static_cast<double>(n))));
  std::array<std::vector<double>, 4> values;
  for (auto& v : values) v.reserve(o.repetitions);

  for (std::size_t rep = 0; rep < o.repetitions; ++rep) {
    auto rng = Xoshiro256::substream(o.seed, rep);
    ConfusionCounts c;
    for (std::size_t k = 0; k < draws; ++k) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      const bool p = predicted[i] == Label::Beat;
      const bool t = truth[i] == Label::Beat;
      if (p && t) ++c.tp;
      else if (!p && !t) ++c.tn;
      else if (p) ++c.fp;
      else ++c.fn;
    }
    for (std::size_t m = 0; m < 4; ++m) values[m].push_back(metric_value(c, kAllMetrics[m]));
  }
  std::array<BootstrapResult, 4> out;
  for (std::size_t m = 0; m < 4; ++m) out[m] = summarize(std::move(values[m]), o.confidence);
  return out;
}

BootstrapResult bootstrap_ci(std::span<const Label> predicted, std::span<const Label> truth, Metric metric,
                             const BootstrapOptions& o) {
  return bootstrap_all(predicted, truth, o)[static_cast<std::size_t>(metric)];
}

EvalReport evaluate_predictions(const std::string& subset, Partition partition, std::span<const Label> predicted,
                                std::span<const Label> truth, const BootstrapOptions& options) {
  EvalReport r;
  r.subset = subset;
  r.partition = partition;
  r.n_segments = predicted.size();
  const auto counts = confusion(predicted, truth);
  const auto boot = bootstrap_all(predicted, truth, options);
  for (std::size_t m = 0; m < 4; ++m) {
    r.metrics[m] = {kAllMetrics[m], metric_value(counts, kAllMetrics[m]), boot[m].mean, boot[m].ci_low, boot[m].ci_high};
  }
  return r;
}

std::string report_csv(const EvalReport& report, bool with_header) {
  std::string out;
  if (with_header) out += "subset,partition,n_segments,metric,point,mean,ci_low,ci_high\n";
  char buf[256];
  for (const auto& m : report.metrics) {
    std::snprintf(buf, sizeof buf, ",%zu,%s,%.6f,%.6f,%.6f,%.6f\n", report.n_segments, std::string(to_string(m.metric)).c_str(),
                  m.point, m.mean, m.ci_low, m.ci_high);
    out += report.subset + "," + std::string(to_string(report.partition)) + buf;
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["subset"] = report.subset;
  j["partition"] = to_string(report.partition);
  j["n_segments"] = report.n_segments;
  auto& metrics = j["metrics"];
  metrics = nlohmann::ordered_json::array();
  for (const auto& m : report.metrics) {
    metrics.push_back({{"metric", to_string(m.metric)},
                       {"point", m.point},
                       {"mean", m.mean},
                       {"ci_low", m.ci_low},
                       {"ci_high", m.ci_high}});
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.subset = j.at("subset").get<std::string>();
    r.partition = parse_partition(j.at("partition").get<std::string>());
    r.n_segments = j.at("n_segments").get<std::size_t>();
    const auto& metrics = j.at("metrics");
    if (metrics.size() != 4) throw Error(ErrorCode::InvalidConfig, "report must list four metrics");
    for (std::size_t m = 0; m < 4; ++m) {
      const auto& e = metrics[m];
      if (e.at("metric").get<std::string>() != to_string(kAllMetrics[m])) {
        throw Error(ErrorCode::InvalidConfig, "unexpected metric order in report");
      }
      r.metrics[m] = {kAllMetrics[m], e.at("point").get<double>(), e.at("mean").get<double>(),
                      e.at("ci_low").get<double>(), e.at("ci_high").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report JSON: ") + e.what());
  }
}

}  // namespace hbd
