#include "hbd/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "hbd/rng.hpp"

namespace hbd {
namespace {

struct Wave {
  double offset_s;
  double amplitude;
  double width_s;
};

constexpr Wave kTemplate[] = {
    {-0.20, 0.15, 0.025},   // P
    {-0.025, -0.12, 0.010}, // Q
    {0.0, 1.00, 0.012},     // R
    {0.025, -0.25, 0.010},  // S
    {0.25, 0.30, 0.045},    // T
};

}  // namespace

IngestedRecord synthetic_record(const std::string& record_id, const std::string& subject_id, DatasetTag tag,
                                double duration_s, std::uint64_t seed, const SyntheticOptions& o) {
  Xoshiro256 rng(seed);
  IngestedRecord out;
  out.record.record_id = record_id;
  out.record.subject_id = subject_id;
  out.record.dataset_tag = tag;
  out.record.fs = o.fs;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * o.fs));
  out.record.samples.assign(n, 0.0f);

  const double gain = 0.8 + 0.4 * rng.uniform();
  const double wander_hz = 0.15 + 0.2 * rng.uniform();
  const double wander_phase = 2.0 * std::numbers::pi * rng.uniform();
  const double mean_rr = 60.0 / o.heart_rate_bpm;

  std::vector<double> beat_times;
  for (double t = 0.3 + 0.5 * rng.uniform(); t < duration_s; t += mean_rr * (1.0 + o.rr_jitter * (rng.uniform() - 0.5))) {
    beat_times.push_back(t);
  }

  std::vector<double> signal(n, 0.0);
  for (double bt : beat_times) {
    for (const auto& w : kTemplate) {
      const double centre = bt + w.offset_s;
      const auto lo = static_cast<std::int64_t>(std::floor((centre - 4 * w.width_s) * o.fs));
      const auto hi = static_cast<std::int64_t>(std::ceil((centre + 4 * w.width_s) * o.fs));
      for (auto i = std::max<std::int64_t>(lo, 0); i <= hi && i < static_cast<std::int64_t>(n); ++i) {
        const double d = (static_cast<double>(i) / o.fs - centre) / w.width_s;
        signal[static_cast<std::size_t>(i)] += gain * w.amplitude * std::exp(-0.5 * d * d);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / o.fs;
    // sum of 4 uniforms, roughly Gaussian with unit variance after scaling
    const double noise = (rng.uniform() + rng.uniform() + rng.uniform() + rng.uniform() - 2.0) * std::sqrt(3.0);
    signal[i] += o.wander_mv * std::sin(2.0 * std::numbers::pi * wander_hz * t + wander_phase) + o.noise_mv * noise;
    out.record.samples[i] = static_cast<float>(signal[i]);
  }
  for (double bt : beat_times) {
    const auto idx = static_cast<std::int64_t>(std::llround(bt * o.fs));
    if (idx < static_cast<std::int64_t>(n) && (out.beats.empty() || idx > out.beats.back())) out.beats.push_back(idx);
  }
  return out;
}

LabeledDataset synthetic_dataset(const std::string& subset, Partition partition, std::size_t n_subjects,
                                 double seconds_per_subject, std::uint64_t seed, const SyntheticOptions& options) {
  LabeledDataset ds{.subset_name = subset, .partition = partition};
  for (std::size_t s = 0; s < n_subjects; ++s) {
    const std::string id = subset + "-" + std::string(to_string(partition)) + "-" + std::to_string(s);
    auto rng_seed = seed;
    const auto rec = synthetic_record(id, id, DatasetTag::NormalSinus, seconds_per_subject, splitmix64(rng_seed) + s, options);
    append_record(ds, rec);
  }
  return ds;
}

}  // namespace hbd
