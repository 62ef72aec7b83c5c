#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbd/wfdb.hpp"

namespace hbd {

enum class DatasetTag {
  NormalSinus,
  LongTerm,
  Arrhythmia,
  BaselineFlexComp,
  BaselineComfTech,
  MovementComfTech,
};

std::string_view to_string(DatasetTag tag) noexcept;
DatasetTag parse_dataset_tag(std::string_view name);

/// Named subset a tag belongs to. NormalSinus and LongTerm share one.
std::string subset_of(DatasetTag tag);

/// Subset names in reporting order.
const std::vector<std::string>& all_subsets();

struct EcgRecord {
  std::string record_id;
  std::string subject_id;
  DatasetTag dataset_tag = DatasetTag::NormalSinus;
  double fs = 0.0;
  std::vector<float> samples;  // mV

  double duration() const noexcept { return fs > 0 ? static_cast<double>(samples.size()) / fs : 0.0; }
};

/// Throws if the record violates its invariants (empty, fs <= 0, non-finite).
void validate(const EcgRecord& record);

/// Column mapping for CSV exports. Columns are named (when the file has a
/// header row) or zero-based indices.
struct CsvSchema {
  std::string value_column = "0";
  std::optional<std::string> marker_column;  // 0/1 beat marker per sample
  bool has_header = false;
  char delimiter = ',';
};

/// Reads a schema file of key=value lines: value_column, marker_column,
/// header (true/false), delimiter.
CsvSchema load_csv_schema(const std::filesystem::path& path);

struct IngestedRecord {
  EcgRecord record;
  std::vector<std::int64_t> beats;  // sample indices, strictly increasing
};

/// Reads a CSV export. Beats come from the marker column, or from
/// `beat_times_path` (one time in seconds per line, rounded to the nearest
/// sample), or are empty when neither is given.
IngestedRecord ingest_csv(const std::filesystem::path& path, const CsvSchema& schema, double fs,
                          const std::optional<std::filesystem::path>& beat_times_path = std::nullopt);

/// One manifest line. Paths are resolved against the data root.
struct ManifestEntry {
  std::string record_id;
  std::string subject_id;
  DatasetTag dataset_tag = DatasetTag::NormalSinus;
  // WFDB sources
  std::optional<std::filesystem::path> header;
  std::optional<std::filesystem::path> signal;  // defaults to the file named in the header
  std::optional<std::filesystem::path> annotations;
  std::size_t channel = 0;
  // CSV sources
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> beats;
  std::optional<std::filesystem::path> schema;
  double fs = 0.0;
  std::size_t line = 0;
};

/// Parses manifest text: one record per line as whitespace-separated
/// key=value pairs; '#' starts a comment. Relative paths are resolved against
/// `data_root`.
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& data_root);

/// Data root for a manifest: $HBD_DATA_ROOT when set, else the manifest's directory.
std::filesystem::path resolve_data_root(const std::filesystem::path& manifest_path);

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path);

/// Loads and decodes one manifest entry. Errors name the record.
IngestedRecord load_entry(const ManifestEntry& entry, std::span<const int> beat_codes);

}  // namespace hbd
