#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "hbd/dataset.hpp"

namespace hbd {

/// BEAT is the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const ConfusionCounts& c) noexcept;

struct PrecisionSensitivityF1 {
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
};

/// Each value is 0 when its denominator is 0.
PrecisionSensitivityF1 precision_sensitivity_f1(const ConfusionCounts& c) noexcept;

enum class Metric { Mcc, Precision, Sensitivity, F1 };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::Mcc, Metric::Precision, Metric::Sensitivity, Metric::F1};

std::string_view to_string(Metric m) noexcept;
double metric_value(const ConfusionCounts& c, Metric m) noexcept;

struct BootstrapResult {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct BootstrapOptions {
  std::size_t repetitions = 100;
  double fraction = 0.25;
  std::uint64_t seed = 0;
  double confidence = 0.90;
};

/// Percentile bootstrap over segments. Repetition r draws round(fraction * n)
/// indices with replacement from Xoshiro256::substream(seed, r), so results
/// do not depend on evaluation order. The interval is the empirical
/// (1 - confidence) / 2 and (1 + confidence) / 2 quantiles with linear
/// interpolation, widened if needed so that it contains the mean.
BootstrapResult bootstrap_ci(std::span<const Label> predicted, std::span<const Label> truth, Metric metric,
                             const BootstrapOptions& options = {});

/// Same as above for all four metrics, sharing the resamples.
std::array<BootstrapResult, 4> bootstrap_all(std::span<const Label> predicted, std::span<const Label> truth,
                                             const BootstrapOptions& options = {});

/// Linear-interpolation quantile of an ascending sequence (q in [0, 1]).
double quantile_sorted(std::span<const double> sorted, double q);

struct MetricSummary {
  Metric metric = Metric::Mcc;
  double point = 0.0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct EvalReport {
  std::string subset;
  Partition partition = Partition::Test;
  std::size_t n_segments = 0;
  std::array<MetricSummary, 4> metrics{};

  const MetricSummary& operator[](Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

EvalReport evaluate_predictions(const std::string& subset, Partition partition, std::span<const Label> predicted,
                                std::span<const Label> truth, const BootstrapOptions& options = {});

/// Header "subset,partition,n_segments,metric,point,mean,ci_low,ci_high",
/// one row per metric.
std::string report_csv(const EvalReport& report, bool with_header = true);
std::string report_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);

}  // namespace hbd
