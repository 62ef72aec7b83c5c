#include "hbd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hbd/binary_io.hpp"
#include "hbd/error.hpp"
#include "hbd/rng.hpp"

namespace hbd {

std::string_view to_string(Partition p) noexcept { return p == Partition::Train ? "Train" : "Test"; }

Partition parse_partition(std::string_view name) {
  if (name == "Train" || name == "train") return Partition::Train;
  if (name == "Test" || name == "test") return Partition::Test;
  throw Error(ErrorCode::InvalidConfig, "unknown partition '" + std::string(name) + "'");
}

Label label_window(double t0, std::span<const double> beat_times) {
  const double lo = t0 + kBeatWindowStart;
  const double hi = t0 + kBeatWindowEnd;
  const auto it = std::lower_bound(beat_times.begin(), beat_times.end(), lo);
  return (it != beat_times.end() && *it < hi) ? Label::Beat : Label::NoBeat;
}

std::vector<float> resample_linear(std::span<const float> samples, double fs_in, std::size_t n_out, double offset) {
  if (samples.size() < 2) throw Error(ErrorCode::SegmentTooShort, "need at least 2 samples to interpolate");
  if (!(fs_in > 0.0)) throw Error(ErrorCode::SegmentTooShort, "fs must be positive");
  const auto last = samples.size() - 1;
  std::vector<float> out(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double x = (offset + static_cast<double>(k) / kResampleHz) * fs_in;
    const double fi = std::floor(x);
    if (fi >= static_cast<double>(last)) {
      out[k] = samples[last];
      continue;
    }
    const auto i = static_cast<std::size_t>(std::max(fi, 0.0));
    const double frac = x - static_cast<double>(i);
    out[k] = static_cast<float>(samples[i] + frac * (static_cast<double>(samples[i + 1]) - samples[i]));
  }
  return out;
}

std::vector<Segment> segment_record(const EcgRecord& record, std::span<const double> beat_times, double max_duration) {
  if (record.samples.empty()) throw Error(ErrorCode::SegmentTooShort, "record " + record.record_id + " is empty");
  const double limit = std::min(record.duration(), max_duration);
  const auto n_windows = static_cast<std::size_t>(std::floor(limit / kWindowSeconds + 1e-9));
  const auto n = record.samples.size();
  const auto span_samples = static_cast<std::size_t>(std::ceil(kWindowSeconds * record.fs)) + 2;

  std::vector<Segment> segments;
  segments.reserve(n_windows);
  for (std::size_t j = 0; j < n_windows; ++j) {
    const double t0 = static_cast<double>(j) * kWindowSeconds;
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(t0 * record.fs)), n - 1);
    const auto i1 = std::min(n, i0 + span_samples);
    const double offset = t0 - static_cast<double>(i0) / record.fs;
    const auto values = resample_linear(std::span(record.samples).subspan(i0, i1 - i0), record.fs, kSegmentLength, offset);

    Segment seg;
    std::copy(values.begin(), values.end(), seg.samples.begin());
    seg.label = label_window(t0, beat_times);
    seg.record_id = record.record_id;
    seg.start_time = t0;
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<double> beat_times_seconds(std::span<const std::int64_t> beats, double fs) {
  std::vector<double> t(beats.size());
  std::transform(beats.begin(), beats.end(), t.begin(), [fs](std::int64_t b) { return static_cast<double>(b) / fs; });
  return t;
}

std::pair<std::set<std::string>, std::set<std::string>> split_subjects(std::span<const std::string> subject_ids,
                                                                       double train_fraction, std::uint64_t seed) {
  std::vector<std::string> ids(subject_ids.begin(), subject_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw Error(ErrorCode::TooFewSubjects, std::to_string(ids.size()) + " distinct subject(s)");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "train fraction must lie in [0, 1]");
  }
  Xoshiro256 rng(seed);
  rng.shuffle(std::span(ids));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  std::set<std::string> train(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::set<std::string> test(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return {std::move(train), std::move(test)};
}

ClassStats class_stats(const LabeledDataset& dataset) {
  ClassStats s;
  s.n_segments = dataset.segments.size();
  s.n_beat = static_cast<std::size_t>(std::count_if(dataset.segments.begin(), dataset.segments.end(),
                                                    [](const Segment& seg) { return seg.label == Label::Beat; }));
  s.percent_beat = s.n_segments == 0 ? 0.0 : 100.0 * static_cast<double>(s.n_beat) / static_cast<double>(s.n_segments);
  return s;
}

void append_record(LabeledDataset& dataset, const IngestedRecord& ingested, double max_duration) {
  const auto times = beat_times_seconds(ingested.beats, ingested.record.fs);
  auto segments = segment_record(ingested.record, times, max_duration);
  dataset.segments.insert(dataset.segments.end(), std::make_move_iterator(segments.begin()),
                          std::make_move_iterator(segments.end()));
  dataset.subject_ids.insert(ingested.record.subject_id);
  dataset.record_subjects[ingested.record.record_id] = ingested.record.subject_id;
}

std::pair<LabeledDataset, LabeledDataset> build_subset(const std::string& subset_name,
                                                       std::span<const IngestedRecord> records, std::uint64_t seed,
                                                       double train_fraction, double max_duration) {
  std::vector<std::string> subjects;
  for (const auto& r : records) subjects.push_back(r.record.subject_id);
  const auto [train_ids, test_ids] = split_subjects(subjects, train_fraction, seed);

  LabeledDataset train{.subset_name = subset_name, .partition = Partition::Train};
  LabeledDataset test{.subset_name = subset_name, .partition = Partition::Test};
  for (const auto& r : records) {
    append_record(train_ids.contains(r.record.subject_id) ? train : test, r, max_duration);
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::uint8_t> serialize_dataset(const LabeledDataset& ds) {
  ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("HBDS"), 4));
  w.put(kCacheVersion);
  w.put_string(ds.subset_name);
  w.put(static_cast<std::uint8_t>(ds.partition));
  w.put(static_cast<std::uint32_t>(ds.subject_ids.size()));
  for (const auto& s : ds.subject_ids) w.put_string(s);

  std::map<std::string, std::uint32_t> record_index;
  w.put(static_cast<std::uint32_t>(ds.record_subjects.size()));
  for (const auto& [record, subject] : ds.record_subjects) {
    record_index.emplace(record, static_cast<std::uint32_t>(record_index.size()));
    w.put_string(record);
    w.put_string(subject);
  }

  w.put(static_cast<std::uint64_t>(ds.segments.size()));
  for (const auto& seg : ds.segments) {
    const auto it = record_index.find(seg.record_id);
    if (it == record_index.end()) {
      throw Error(ErrorCode::CorruptCache, "segment references unregistered record " + seg.record_id);
    }
    w.put(it->second);
    w.put(seg.start_time);
    w.put(static_cast<std::uint8_t>(seg.label));
    w.put_array(std::span<const float>(seg.samples));
  }
  w.seal();
  return w.bytes();
}

LabeledDataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  auto corrupt = [](const std::string& what) { return Error(ErrorCode::CorruptCache, what); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "HBDS", 4) != 0) throw corrupt("bad magic");
  if (!checksum_matches(bytes)) throw corrupt("checksum mismatch");

  ByteReader r(bytes.first(bytes.size() - 8));
  r.get<std::uint32_t>();  // magic
  if (const auto version = r.get<std::uint32_t>(); version != kCacheVersion) {
    throw corrupt("unsupported cache version " + std::to_string(version));
  }
  LabeledDataset ds;
  ds.subset_name = r.get_string();
  const auto partition = r.get<std::uint8_t>();
  if (partition > 1) throw corrupt("bad partition");
  ds.partition = static_cast<Partition>(partition);
  const auto n_subjects = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_subjects && r.ok(); ++i) ds.subject_ids.insert(r.get_string());

  const auto n_records = r.get<std::uint32_t>();
  std::vector<std::string> records;
  for (std::uint32_t i = 0; i < n_records && r.ok(); ++i) {
    auto record = r.get_string();
    auto subject = r.get_string();
    records.push_back(record);
    ds.record_subjects.emplace(std::move(record), std::move(subject));
  }

  const auto n_segments = r.get<std::uint64_t>();
  constexpr std::size_t kSegmentBytes = 4 + 8 + 1 + 4 * kSegmentLength;
  if (!r.ok() || n_segments > r.remaining() / kSegmentBytes) throw corrupt("segment count exceeds file size");
  ds.segments.resize(n_segments);
  for (auto& seg : ds.segments) {
    const auto idx = r.get<std::uint32_t>();
    if (idx >= records.size()) throw corrupt("bad record index");
    seg.record_id = records[idx];
    seg.start_time = r.get<double>();
    const auto label = r.get<std::uint8_t>();
    if (label > 1) throw corrupt("bad label");
    seg.label = static_cast<Label>(label);
    r.get_array(std::span<float>(seg.samples));
  }
  if (!r.ok() || r.remaining() != 0) throw corrupt("length mismatch");
  return ds;
}

void save_cache(const LabeledDataset& dataset, const std::filesystem::path& path) {
  write_file_bytes(path.string(), serialize_dataset(dataset));
}

LabeledDataset load_cache(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingCache, path.string());
  return deserialize_dataset(read_file_bytes(path.string()));
}

std::string cache_file_name(const std::string& subset, Partition partition) {
  return subset + "_" + std::string(to_string(partition)) + ".hbds";
}

}  // namespace hbd
