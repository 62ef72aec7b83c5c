#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "hbd/binary_io.hpp"
#include "hbd/dataset.hpp"
#include "hbd/rng.hpp"
#include "hbd/synthetic.hpp"
#include "test_util.hpp"

using namespace hbd;
using hbd::testing::error_code_of;

TEST_CASE("label_window boundaries") {
  const std::vector<double> at_012{10.12}, at_005{10.05}, at_015{10.15}, at_010{10.10};
  CHECK(label_window(10.0, at_012) == Label::Beat);
  CHECK(label_window(10.0, at_005) == Label::NoBeat);
  CHECK(label_window(10.0, at_015) == Label::NoBeat);
  CHECK(label_window(10.0, at_010) == Label::Beat);
  CHECK(label_window(10.0, std::vector<double>{}) == Label::NoBeat);
}

TEST_CASE("property: label_window matches a linear scan") {
  Xoshiro256 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> beats(rng.below(20));
    for (auto& b : beats) b = 5.0 * rng.uniform();
    std::sort(beats.begin(), beats.end());
    const double t0 = 0.25 * static_cast<double>(rng.below(20));
    bool any = false;
    for (double b : beats) any = any || (b >= t0 + 0.10 && b < t0 + 0.15);
    CHECK(label_window(t0, beats) == (any ? Label::Beat : Label::NoBeat));
  }
}

TEST_CASE("resample_linear examples") {
  const std::vector<float> constant(91, 2.5f);
  for (float v : resample_linear(constant, 360)) CHECK(v == 2.5f);

  const std::vector<float> two{0.f, 1.f};
  const auto ramp = resample_linear(two, 4);
  REQUIRE(ramp.size() == 250);
  for (std::size_t k = 0; k < 250; ++k) CHECK(ramp[k] == doctest::Approx(4.0 * k / 1000.0).epsilon(1e-6));
  CHECK(ramp.back() == doctest::Approx(0.996));

  std::vector<float> same(250);
  for (std::size_t i = 0; i < same.size(); ++i) same[i] = std::sin(0.1f * static_cast<float>(i));
  CHECK(resample_linear(same, 1000) == same);

  CHECK(error_code_of([] { resample_linear(std::vector<float>{1.f}, 360); }) == ErrorCode::SegmentTooShort);
}

TEST_CASE("property: resampling an affine signal is exact") {
  Xoshiro256 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double fs = 100.0 + 900.0 * rng.uniform();
    const double a = rng.uniform() * 4 - 2, b = rng.uniform() * 4 - 2;
    const double offset = rng.uniform() / fs;
    const auto n = static_cast<std::size_t>(std::ceil(0.25 * fs)) + 3;
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(a + b * static_cast<double>(i) / fs);
    const auto y = resample_linear(x, fs, 250, offset);
    for (std::size_t k = 0; k < 250; ++k) {
      const double t = offset + static_cast<double>(k) / 1000.0;
      CHECK(std::abs(y[k] - (a + b * t)) < 1e-6);
    }
  }
}

TEST_CASE("segment counts") {
  EcgRecord r{"r", "s", DatasetTag::LongTerm, 128, std::vector<float>(3600 * 128, 0.f)};
  CHECK(segment_record(r, {}).size() == 14400);
  r.samples.assign(300 * 360, 0.f);
  r.fs = 360;
  CHECK(segment_record(r, {}).size() == 1200);
  r.samples.assign(4000 * 128, 0.f);
  r.fs = 128;
  CHECK(segment_record(r, {}).size() == 14400);
  CHECK(segment_record(r, {}, 900).size() == 3600);
  r.samples.assign(100, 0.f);  // 0.78 s at 128 Hz
  CHECK(segment_record(r, {}).size() == 3);
}

TEST_CASE("property: segment labels match a brute-force oracle and samples come from the window") {
  const auto rec = synthetic_record("r", "s", DatasetTag::Arrhythmia, 30.0, 9);
  const auto times = beat_times_seconds(rec.beats, rec.record.fs);
  const auto segs = segment_record(rec.record, times);
  REQUIRE(segs.size() == 120);
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const double t0 = 0.25 * static_cast<double>(j);
    bool any = false;
    for (double b : times) any = any || (b >= t0 + 0.10 && b < t0 + 0.15);
    CHECK(segs[j].label == (any ? Label::Beat : Label::NoBeat));
    CHECK(segs[j].start_time == doctest::Approx(t0));
    const auto i0 = static_cast<std::size_t>(std::floor(t0 * rec.record.fs));
    if (std::abs(t0 * rec.record.fs - static_cast<double>(i0)) < 1e-9) CHECK(segs[j].samples[0] == rec.record.samples[i0]);
  }
}

TEST_CASE("split_subjects") {
  auto ids = [](int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back("s" + std::to_string(i));
    return v;
  };
  const auto [a18, b18] = split_subjects(ids(18), 2.0 / 3.0, 1);
  CHECK(a18.size() == 12);
  CHECK(b18.size() == 6);
  const auto [a25, b25] = split_subjects(ids(25), 2.0 / 3.0, 1);
  CHECK(a25.size() == 17);
  CHECK(b25.size() == 8);
  CHECK(split_subjects(ids(25), 2.0 / 3.0, 1) == split_subjects(ids(25), 2.0 / 3.0, 1));

  auto shuffled = ids(25);
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(split_subjects(shuffled, 2.0 / 3.0, 1) == split_subjects(ids(25), 2.0 / 3.0, 1));

  bool differs = false;
  for (std::uint64_t seed = 2; seed < 10 && !differs; ++seed) differs = split_subjects(ids(25), 2.0 / 3.0, seed).first != a25;
  CHECK(differs);

  CHECK(error_code_of([&] { split_subjects(ids(1), 0.5, 1); }) == ErrorCode::TooFewSubjects);
  const std::vector<std::string> dup{"a", "a", "a"};
  CHECK(error_code_of([&] { split_subjects(dup, 0.5, 1); }) == ErrorCode::TooFewSubjects);
}

TEST_CASE("property: splits are disjoint and cover every subject") {
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> ids;
    const auto n = 2 + rng.below(40);
    for (std::uint64_t i = 0; i < n; ++i) ids.push_back("x" + std::to_string(rng.below(60)));
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() < 2) continue;
    const double f = rng.uniform();
    const auto [train, test] = split_subjects(ids, f, rng());
    std::set<std::string> all = train;
    all.insert(test.begin(), test.end());
    CHECK(all == unique);
    CHECK(train.size() + test.size() == unique.size());
    CHECK(train.size() == static_cast<std::size_t>(std::llround(f * static_cast<double>(unique.size()))));
  }
}

TEST_CASE("class_stats") {
  LabeledDataset ds;
  CHECK(class_stats(ds).n_segments == 0);
  CHECK(class_stats(ds).percent_beat == 0.0);
  ds.segments.resize(100);
  for (int i = 0; i < 7; ++i) ds.segments[static_cast<std::size_t>(i)].label = Label::Beat;
  CHECK(class_stats(ds).n_beat == 7);
  CHECK(class_stats(ds).percent_beat == doctest::Approx(7.0));
}

TEST_CASE("build_subset keeps subjects on one side") {
  std::vector<IngestedRecord> recs;
  for (int s = 0; s < 6; ++s) {
    for (int k = 0; k < 2; ++k) {
      recs.push_back(synthetic_record("r" + std::to_string(s) + std::to_string(k), "subj" + std::to_string(s),
                                      DatasetTag::Arrhythmia, 5.0, static_cast<std::uint64_t>(10 * s + k)));
    }
  }
  const auto [train, test] = build_subset("Arrhythmia", recs, 1);
  CHECK(train.subject_ids.size() == 4);
  CHECK(test.subject_ids.size() == 2);
  CHECK(train.segments.size() == 4 * 2 * 20);
  for (const auto& seg : test.segments) CHECK(test.subject_ids.contains(test.record_subjects.at(seg.record_id)));
  for (const auto& s : train.subject_ids) CHECK_FALSE(test.subject_ids.contains(s));
}

TEST_CASE("cache round trip and corruption") {
  hbd::testing::TempDir dir("cache");
  const auto ds = synthetic_dataset("Arrhythmia", Partition::Test, 3, 6.0, 21);
  const auto path = dir / cache_file_name(ds.subset_name, ds.partition);
  CHECK(path.filename() == "Arrhythmia_Test.hbds");
  save_cache(ds, path);
  CHECK(load_cache(path) == ds);

  LabeledDataset empty{.subset_name = "e", .partition = Partition::Train};
  CHECK(deserialize_dataset(serialize_dataset(empty)) == empty);

  const auto bytes = serialize_dataset(ds);
  CHECK(error_code_of([&] { deserialize_dataset(std::span(bytes).first(bytes.size() / 2)); }) == ErrorCode::CorruptCache);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK(error_code_of([&] { deserialize_dataset(flipped); }) == ErrorCode::CorruptCache);
  CHECK(error_code_of([&] { load_cache(dir / "missing.hbds"); }) == ErrorCode::MissingCache);

  Xoshiro256 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cut = static_cast<std::size_t>(rng.below(bytes.size()));
    CHECK(error_code_of([&] { deserialize_dataset(std::span(bytes).first(cut)); }) == ErrorCode::CorruptCache);
  }
}

TEST_CASE("synthetic records are deterministic and roughly 1 beat per second") {
  const auto a = synthetic_record("a", "a", DatasetTag::NormalSinus, 60.0, 1);
  const auto b = synthetic_record("a", "a", DatasetTag::NormalSinus, 60.0, 1);
  CHECK(a.record.samples == b.record.samples);
  CHECK(a.beats == b.beats);
  CHECK(a.beats.size() > 55);
  CHECK(a.beats.size() < 90);
}

TEST_CASE("property: random beats on short records match the brute-force label scan") {
  Xoshiro256 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const double fs = 100.0 + static_cast<double>(rng.below(900));
    const auto windows = 1 + rng.below(20);
    const auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(windows) * 0.25 * fs)) + rng.below(5);
    EcgRecord r{"r", "s", DatasetTag::Arrhythmia, fs, std::vector<float>(n)};
    for (auto& v : r.samples) v = static_cast<float>(rng.uniform() - 0.5);
    std::vector<std::int64_t> beats;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 3.0 / fs) beats.push_back(static_cast<std::int64_t>(i));
    }
    const auto times = beat_times_seconds(beats, fs);
    const auto segs = segment_record(r, times);
    CHECK(segs.size() == static_cast<std::size_t>(std::floor(r.duration() / 0.25 + 1e-9)));
    for (std::size_t j = 0; j < segs.size(); ++j) {
      bool any = false;
      for (double b : times) any = any || (b >= 0.25 * j + 0.10 && b < 0.25 * j + 0.15);
      CHECK(segs[j].label == (any ? Label::Beat : Label::NoBeat));
      for (float v : segs[j].samples) CHECK(std::isfinite(v));
    }
  }
}
