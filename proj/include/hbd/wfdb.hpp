#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hbd {

/// One signal line of a WFDB header.
struct WfdbSignal {
  std::string file_name;
  int format = 0;            // 212 or 16
  std::size_t byte_offset = 0;
  double gain = 200.0;       // ADC units per mV
  int baseline = 0;          // ADC units
  int adc_zero = 0;
  std::string units = "mV";
  std::string description;
};

struct WfdbHeader {
  std::string record_name;
  double fs = 0.0;
  std::size_t n_samples = 0;
  std::vector<WfdbSignal> signals;

  std::size_t n_signals() const noexcept { return signals.size(); }
};

/// Parses a single-segment WFDB header. Formats other than 212 and 16 are
/// rejected; a zero gain is replaced by the WFDB default of 200 units/mV.
WfdbHeader parse_header(std::string_view header_text);

/// Decodes one channel of a signal file into millivolts. `raw_bytes` holds the
/// contents of the file the channel lives in; signals sharing that file are
/// interleaved frame by frame.
std::vector<float> decode_signal(std::span<const std::uint8_t> raw_bytes, const WfdbHeader& header,
                                 std::size_t channel);

/// Raw ADC stream of one file, before gain/baseline are applied. Exposed for
/// round-trip tests.
std::vector<int> decode_adc(std::span<const std::uint8_t> raw_bytes, int format,
                            std::size_t n_values);

/// Packs 12-bit values (range [-2048, 2047]) in format 212.
std::vector<std::uint8_t> encode_format212(std::span<const int> adc);
/// Packs 16-bit values little-endian (format 16).
std::vector<std::uint8_t> encode_format16(std::span<const int> adc);

struct AnnotationEvent {
  std::int64_t sample = 0;
  int code = 0;

  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

struct BeatAnnotations {
  double fs = 0.0;
  std::vector<AnnotationEvent> events;
};

/// WFDB annotation codes that mark a heart beat (N L R B A a J S V r F e j n E f Q ?).
std::vector<int> default_beat_codes();

/// Decodes an MIT-format annotation stream (.atr). Every annotation is kept,
/// including rhythm and signal-quality marks; use filter_beats afterwards.
/// Events are non-decreasing; co-located annotations on different chan/num
/// fields are legal in this format.
BeatAnnotations parse_annotations(std::span<const std::uint8_t> raw_bytes, double fs);

/// Sample indices of events whose code is in `beat_codes`, strictly increasing
/// (co-located beats collapse to one).
std::vector<std::int64_t> filter_beats(const BeatAnnotations& annotations,
                                       std::span<const int> beat_codes);

}  // namespace hbd
