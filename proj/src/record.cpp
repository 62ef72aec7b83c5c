#include "hbd/record.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hbd/binary_io.hpp"
#include "hbd/error.hpp"

namespace hbd {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool to_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t column_index(const std::string& column, const std::vector<std::string>& header_row, bool has_header) {
  if (has_header) {
    const auto it = std::find(header_row.begin(), header_row.end(), column);
    if (it != header_row.end()) return static_cast<std::size_t>(it - header_row.begin());
  }
  std::size_t idx = 0;
  auto [p, ec] = std::from_chars(column.data(), column.data() + column.size(), idx);
  if (ec != std::errc() || p != column.data() + column.size()) {
    throw Error(ErrorCode::SchemaMismatch, "no column '" + column + "'");
  }
  return idx;
}

}  // namespace

std::string_view to_string(DatasetTag tag) noexcept {
  switch (tag) {
    case DatasetTag::NormalSinus: return "NormalSinus";
    case DatasetTag::LongTerm: return "LongTerm";
    case DatasetTag::Arrhythmia: return "Arrhythmia";
    case DatasetTag::BaselineFlexComp: return "BaselineFlexComp";
    case DatasetTag::BaselineComfTech: return "BaselineComfTech";
    case DatasetTag::MovementComfTech: return "MovementComfTech";
  }
  return "?";
}

DatasetTag parse_dataset_tag(std::string_view name) {
  for (auto tag : {DatasetTag::NormalSinus, DatasetTag::LongTerm, DatasetTag::Arrhythmia,
                   DatasetTag::BaselineFlexComp, DatasetTag::BaselineComfTech, DatasetTag::MovementComfTech}) {
    if (to_string(tag) == name) return tag;
  }
  throw Error(ErrorCode::MalformedManifest, "unknown dataset tag '" + std::string(name) + "'");
}

std::string subset_of(DatasetTag tag) {
  if (tag == DatasetTag::NormalSinus || tag == DatasetTag::LongTerm) return "NormalSinus+LongTerm";
  return std::string(to_string(tag));
}

const std::vector<std::string>& all_subsets() {
  static const std::vector<std::string> names = {"NormalSinus+LongTerm", "Arrhythmia", "BaselineFlexComp",
                                                 "BaselineComfTech", "MovementComfTech"};
  return names;
}

void validate(const EcgRecord& r) {
  if (r.samples.empty()) throw Error(ErrorCode::SegmentTooShort, "record " + r.record_id + " has no samples");
  if (!(r.fs > 0.0)) throw Error(ErrorCode::SchemaMismatch, "record " + r.record_id + " has non-positive fs");
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (!std::isfinite(r.samples[i])) {
      throw Error(ErrorCode::SchemaMismatch, "record " + r.record_id + " sample " + std::to_string(i) + " is not finite");
    }
  }
}

CsvSchema load_csv_schema(const fs::path& path) {
  CsvSchema schema;
  std::istringstream is(read_text(path));
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::SchemaMismatch, "schema line without '=': " + line);
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key == "value_column") {
      schema.value_column = value;
    } else if (key == "marker_column") {
      schema.marker_column = value;
    } else if (key == "header") {
      schema.has_header = (value == "true" || value == "1" || value == "yes");
    } else if (key == "delimiter") {
      schema.delimiter = value == "\\t" ? '\t' : (value.empty() ? ',' : value[0]);
    } else {
      throw Error(ErrorCode::SchemaMismatch, "unknown schema key '" + key + "'");
    }
  }
  return schema;
}

IngestedRecord ingest_csv(const fs::path& path, const CsvSchema& schema, double fs_hz,
                          const std::optional<fs::path>& beat_times_path) {
  if (!(fs_hz > 0.0)) throw Error(ErrorCode::SchemaMismatch, "fs must be positive for " + path.string());
  IngestedRecord out;
  out.record.fs = fs_hz;
  out.record.record_id = path.stem().string();

  std::istringstream is(read_text(path));
  std::string line;
  std::vector<std::string> header_row;
  bool header_pending = schema.has_header;
  std::size_t value_col = 0;
  std::optional<std::size_t> marker_col;
  bool resolved = false;
  std::size_t row = 0;

  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto fields = split(line, schema.delimiter);
    if (header_pending) {
      header_row = std::move(fields);
      header_pending = false;
      continue;
    }
    if (!resolved) {
      value_col = column_index(schema.value_column, header_row, schema.has_header);
      if (schema.marker_column) marker_col = column_index(*schema.marker_column, header_row, schema.has_header);
      resolved = true;
    }
    const std::size_t needed = std::max(value_col, marker_col.value_or(0)) + 1;
    if (fields.size() < needed) {
      throw Error(ErrorCode::SchemaMismatch, path.string() + " row " + std::to_string(row) + " has " +
                                                 std::to_string(fields.size()) + " columns");
    }
    double v = 0.0;
    if (!to_double(fields[value_col], v)) {
      throw Error(ErrorCode::SchemaMismatch, path.string() + " row " + std::to_string(row) + ": '" + fields[value_col] + "' is not numeric");
    }
    if (marker_col) {
      double m = 0.0;
      if (!to_double(fields[*marker_col], m)) throw Error(ErrorCode::SchemaMismatch, "non-numeric beat marker");
      if (m != 0.0) out.beats.push_back(static_cast<std::int64_t>(out.record.samples.size()));
    }
    out.record.samples.push_back(static_cast<float>(v));
    ++row;
  }

  if (beat_times_path) {
    if (marker_col) throw Error(ErrorCode::SchemaMismatch, "both a marker column and a beat-times file were given");
    std::istringstream bs(read_text(*beat_times_path));
    double previous = -1.0;
    while (std::getline(bs, line)) {
      const auto t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      double seconds = 0.0;
      if (!to_double(t, seconds)) {
        if (previous < 0.0 && out.beats.empty()) continue;  // header row
        throw Error(ErrorCode::SchemaMismatch, "beat time '" + t + "' is not numeric");
      }
      if (seconds <= previous || seconds < 0.0) {
        throw Error(ErrorCode::NonMonotonicTime, "beat time " + t + " does not increase");
      }
      previous = seconds;
      const auto idx = static_cast<std::int64_t>(std::llround(seconds * fs_hz));
      if (!out.beats.empty() && idx <= out.beats.back()) continue;  // two beats rounded onto one sample
      out.beats.push_back(idx);
    }
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const fs::path& data_root) {
  std::vector<ManifestEntry> entries;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : data_root / p; };

  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;

    ManifestEntry e;
    e.line = line_no;
    bool has_tag = false;
    std::istringstream ls(line);
    std::string tok;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line_no) + ": " + what);
    };
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail("token '" + tok + "' is not key=value");
      const auto key = tok.substr(0, eq);
      const auto value = tok.substr(eq + 1);
      if (key == "record_id") e.record_id = value;
      else if (key == "subject_id") e.subject_id = value;
      else if (key == "dataset") { e.dataset_tag = parse_dataset_tag(value); has_tag = true; }
      else if (key == "header") e.header = resolve(value);
      else if (key == "signal") e.signal = resolve(value);
      else if (key == "annotations") e.annotations = resolve(value);
      else if (key == "channel") e.channel = std::stoul(value);
      else if (key == "csv") e.csv = resolve(value);
      else if (key == "beats") e.beats = resolve(value);
      else if (key == "schema") e.schema = resolve(value);
      else if (key == "fs") { if (!to_double(value, e.fs)) fail("bad fs"); }
      else fail("unknown key '" + key + "'");
    }
    if (e.record_id.empty()) fail("missing record_id");
    if (!has_tag) fail("missing dataset");
    if (e.subject_id.empty()) e.subject_id = e.record_id;
    if (!e.header && !e.csv) fail("record " + e.record_id + " has neither header= nor csv=");
    if (e.csv && !(e.fs > 0.0)) fail("record " + e.record_id + ": csv sources need fs=");
    entries.push_back(std::move(e));
  }
  return entries;
}

fs::path resolve_data_root(const fs::path& manifest_path) {
  if (const char* env = std::getenv("HBD_DATA_ROOT"); env != nullptr && *env != '\0') return fs::path(env);
  return manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
}

std::vector<ManifestEntry> load_manifest(const fs::path& manifest_path) {
  return parse_manifest(read_text(manifest_path), resolve_data_root(manifest_path));
}

IngestedRecord load_entry(const ManifestEntry& entry, std::span<const int> beat_codes) {
  try {
    IngestedRecord out;
    if (entry.header) {
      const auto header = parse_header(read_text(*entry.header));
      if (entry.channel >= header.n_signals()) {
        throw Error(ErrorCode::ChannelOutOfRange, "channel " + std::to_string(entry.channel));
      }
      const auto signal_path = entry.signal.value_or(entry.header->parent_path() / header.signals[entry.channel].file_name);
      const auto raw = read_file_bytes(signal_path.string());
      out.record.samples = decode_signal(raw, header, entry.channel);
      out.record.fs = header.fs;
      if (entry.annotations) {
        const auto ann = parse_annotations(read_file_bytes(entry.annotations->string()), header.fs);
        out.beats = filter_beats(ann, beat_codes);
      }
    } else {
      const CsvSchema schema = entry.schema ? load_csv_schema(*entry.schema) : CsvSchema{};
      out = ingest_csv(*entry.csv, schema, entry.fs, entry.beats);
    }
    out.record.record_id = entry.record_id;
    out.record.subject_id = entry.subject_id;
    out.record.dataset_tag = entry.dataset_tag;
    validate(out.record);
    const auto n = static_cast<std::int64_t>(out.record.samples.size());
    std::erase_if(out.beats, [n](std::int64_t b) { return b >= n; });
    return out;
  } catch (const Error& e) {
    throw Error(e.code(), "record " + entry.record_id + ": " + e.what());
  }
}

}  // namespace hbd
