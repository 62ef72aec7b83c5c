#pragma once

#include <cstdint>
#include <string>

#include "hbd/dataset.hpp"
#include "hbd/record.hpp"

namespace hbd {

/// Shape of a generated ECG: P-QRS-T template built from Gaussians, RR jitter,
/// baseline wander and broadband noise.
struct SyntheticOptions {
  double fs = 360.0;
  double heart_rate_bpm = 72.0;
  double rr_jitter = 0.15;      // relative, uniform
  double noise_mv = 0.03;
  double wander_mv = 0.10;
};

/// Annotated record; beats sit on the R peaks.
IngestedRecord synthetic_record(const std::string& record_id, const std::string& subject_id, DatasetTag tag,
                                double duration_s, std::uint64_t seed, const SyntheticOptions& options = {});

/// One partition assembled from `n_subjects` generated subjects of
/// `seconds_per_subject` each (4 segments per second).
LabeledDataset synthetic_dataset(const std::string& subset, Partition partition, std::size_t n_subjects,
                                 double seconds_per_subject, std::uint64_t seed, const SyntheticOptions& options = {});

}  // namespace hbd
