#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hbd/record.hpp"

namespace hbd {

inline constexpr std::size_t kSegmentLength = 250;
inline constexpr double kWindowSeconds = 0.25;
inline constexpr double kResampleHz = 1000.0;
inline constexpr double kBeatWindowStart = 0.10;  // relative to window start, inclusive
inline constexpr double kBeatWindowEnd = 0.15;    // exclusive
inline constexpr double kMaxRecordSeconds = 3600.0;

enum class Label : std::uint8_t { NoBeat = 0, Beat = 1 };
enum class Partition : std::uint8_t { Train = 0, Test = 1 };

std::string_view to_string(Partition p) noexcept;
Partition parse_partition(std::string_view name);

struct Segment {
  std::array<float, kSegmentLength> samples{};
  Label label = Label::NoBeat;
  std::string record_id;
  double start_time = 0.0;  // seconds from record start

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct LabeledDataset {
  std::string subset_name;
  Partition partition = Partition::Train;
  std::vector<Segment> segments;
  std::set<std::string> subject_ids;
  std::map<std::string, std::string> record_subjects;  // record_id -> subject_id

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// BEAT iff some beat lies in [t0 + 0.10, t0 + 0.15). `beat_times` ascending.
Label label_window(double t0, std::span<const double> beat_times);

/// Linear interpolation of `samples` (sampled at fs_in, first sample at t=0)
/// at times offset + k/1000 for k = 0..n_out-1. Queries past the last input
/// sample take the last value.
std::vector<float> resample_linear(std::span<const float> samples, double fs_in,
                                   std::size_t n_out = kSegmentLength, double offset = 0.0);

/// Cuts the first min(duration, max_duration) seconds into non-overlapping
/// 0.25 s windows, labels each against `beat_times` (seconds) and resamples it
/// to 250 samples. A trailing partial window is dropped.
std::vector<Segment> segment_record(const EcgRecord& record, std::span<const double> beat_times,
                                    double max_duration = kMaxRecordSeconds);

/// Beat sample indices to seconds.
std::vector<double> beat_times_seconds(std::span<const std::int64_t> beats, double fs);

/// Sorts ids, shuffles them with the seeded generator and assigns the first
/// round(train_fraction * n) to Train.
std::pair<std::set<std::string>, std::set<std::string>> split_subjects(std::span<const std::string> subject_ids,
                                                                       double train_fraction, std::uint64_t seed);

struct ClassStats {
  std::size_t n_segments = 0;
  std::size_t n_beat = 0;
  double percent_beat = 0.0;
};

ClassStats class_stats(const LabeledDataset& dataset);

/// Appends every segment of `ingested` to `dataset` and registers its subject.
void append_record(LabeledDataset& dataset, const IngestedRecord& ingested, double max_duration = kMaxRecordSeconds);

/// Builds the Train and Test partitions of one subset from already loaded
/// records (in manifest order). Records are split by subject.
std::pair<LabeledDataset, LabeledDataset> build_subset(const std::string& subset_name,
                                                       std::span<const IngestedRecord> records,
                                                       std::uint64_t seed, double train_fraction = 2.0 / 3.0,
                                                       double max_duration = kMaxRecordSeconds);

// Binary cache: "HBDS", u32 version, subset, partition, record table,
// segments, trailing FNV-1a 64 checksum. All little-endian.
inline constexpr std::uint32_t kCacheVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const LabeledDataset& dataset);
LabeledDataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_cache(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_cache(const std::filesystem::path& path);

/// Conventional cache file name for a subset partition, e.g.
/// "Arrhythmia_Test.hbds".
std::string cache_file_name(const std::string& subset, Partition partition);

}  // namespace hbd
