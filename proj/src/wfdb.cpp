#include "hbd/wfdb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hbd/error.hpp"

namespace hbd {
namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedHeader, what); }

// "fs[/counterfreq][(basecount)]"
double parse_frequency(std::string_view tok) {
  const auto end = tok.find_first_of("/(");
  double fs = 0.0;
  if (!parse_number(tok.substr(0, end), fs)) malformed("non-numeric sampling frequency '" + std::string(tok) + "'");
  if (!(fs > 0.0)) malformed("sampling frequency must be positive");
  return fs;
}

// "format[xsamp][:skew][+offset]"
void parse_format_field(std::string_view tok, WfdbSignal& sig) {
  const auto end = tok.find_first_of("x:+");
  if (!parse_number(tok.substr(0, end), sig.format)) malformed("bad format field '" + std::string(tok) + "'");
  if (sig.format != 212 && sig.format != 16) {
    throw Error(ErrorCode::UnsupportedFormat, "format " + std::to_string(sig.format));
  }
  std::size_t pos = end;
  while (pos != std::string_view::npos && pos < tok.size()) {
    const char kind = tok[pos];
    const auto next = tok.find_first_of("x:+", pos + 1);
    const auto value = tok.substr(pos + 1, next == std::string_view::npos ? std::string_view::npos : next - pos - 1);
    long v = 0;
    if (!parse_number(value, v)) malformed("bad format modifier in '" + std::string(tok) + "'");
    if (kind == 'x' && v != 1) throw Error(ErrorCode::UnsupportedFormat, "multi-sample frames");
    if (kind == ':' && v != 0) throw Error(ErrorCode::UnsupportedFormat, "signal skew");
    if (kind == '+') sig.byte_offset = static_cast<std::size_t>(v);
    pos = next;
  }
}

// "gain[(baseline)][/units]"; returns whether a baseline was given
bool parse_gain_field(std::string_view tok, WfdbSignal& sig) {
  std::string_view units;
  if (const auto slash = tok.find('/'); slash != std::string_view::npos) {
    units = tok.substr(slash + 1);
    tok = tok.substr(0, slash);
  }
  bool has_baseline = false;
  if (const auto paren = tok.find('('); paren != std::string_view::npos) {
    const auto close = tok.find(')', paren);
    if (close == std::string_view::npos || !parse_number(tok.substr(paren + 1, close - paren - 1), sig.baseline)) {
      malformed("bad baseline in gain field");
    }
    has_baseline = true;
    tok = tok.substr(0, paren);
  }
  if (!parse_number(tok, sig.gain)) malformed("non-numeric gain '" + std::string(tok) + "'");
  if (sig.gain == 0.0) sig.gain = 200.0;
  if (sig.gain < 0.0) malformed("negative gain");
  if (!units.empty()) sig.units = std::string(units);
  return has_baseline;
}

int sign_extend12(int v) noexcept { return (v & 0x800) ? v - 0x1000 : v; }

}  // namespace

WfdbHeader parse_header(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      lines.push_back(line);
    }
  }
  if (lines.empty()) malformed("empty header");

  WfdbHeader h;
  const auto rec = split_ws(lines[0]);
  if (rec.size() < 4) malformed("record line needs name, signal count, frequency and sample count");
  if (rec[0].find('/') != std::string::npos) throw Error(ErrorCode::MalformedHeader, "multi-segment records are not supported");
  h.record_name = rec[0];
  std::size_t n_signals = 0;
  if (!parse_number(std::string_view(rec[1]), n_signals) || n_signals < 1) malformed("bad signal count '" + rec[1] + "'");
  h.fs = parse_frequency(rec[2]);
  if (!parse_number(std::string_view(rec[3]), h.n_samples)) malformed("non-numeric sample count '" + rec[3] + "'");

  if (lines.size() < 1 + n_signals) malformed("header declares more signals than signal lines");
  for (std::size_t i = 0; i < n_signals; ++i) {
    const auto f = split_ws(lines[1 + i]);
    if (f.size() < 2) malformed("signal line " + std::to_string(i) + " is missing fields");
    WfdbSignal sig;
    sig.file_name = f[0];
    parse_format_field(f[1], sig);
    bool has_baseline = false;
    if (f.size() > 2) has_baseline = parse_gain_field(f[2], sig);
    // f[3] = ADC resolution (unused)
    if (f.size() > 4 && !parse_number(std::string_view(f[4]), sig.adc_zero)) malformed("bad ADC zero");
    if (!has_baseline) sig.baseline = sig.adc_zero;
    // f[5] initial value, f[6] checksum, f[7] block size, then description
    for (std::size_t k = 8; k < f.size(); ++k) {
      if (!sig.description.empty()) sig.description += ' ';
      sig.description += f[k];
    }
    h.signals.push_back(std::move(sig));
  }
  return h;
}

std::vector<int> decode_adc(std::span<const std::uint8_t> raw, int format, std::size_t n_values) {
  std::vector<int> out(n_values);
  if (format == 212) {
    const std::size_t needed = (n_values * 3 + 1) / 2;
    if (raw.size() < needed) {
      throw Error(ErrorCode::TruncatedData, "format 212 needs " + std::to_string(needed) + " bytes, got " + std::to_string(raw.size()));
    }
    for (std::size_t j = 0; j < n_values; ++j) {
      const std::size_t base = (j / 2) * 3;
      if (j % 2 == 0) {
        out[j] = sign_extend12(raw[base] | ((raw[base + 1] & 0x0F) << 8));
      } else {
        out[j] = sign_extend12(raw[base + 2] | ((raw[base + 1] & 0xF0) << 4));
      }
    }
  } else if (format == 16) {
    if (raw.size() < n_values * 2) {
      throw Error(ErrorCode::TruncatedData, "format 16 needs " + std::to_string(n_values * 2) + " bytes, got " + std::to_string(raw.size()));
    }
    for (std::size_t j = 0; j < n_values; ++j) {
      out[j] = static_cast<std::int16_t>(raw[2 * j] | (raw[2 * j + 1] << 8));
    }
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "format " + std::to_string(format));
  }
  return out;
}

std::vector<float> decode_signal(std::span<const std::uint8_t> raw, const WfdbHeader& header, std::size_t channel) {
  if (channel >= header.n_signals()) {
    throw Error(ErrorCode::ChannelOutOfRange, "channel " + std::to_string(channel) + " of " + std::to_string(header.n_signals()));
  }
  const auto& sig = header.signals[channel];
  // Signals stored in the same file form one interleaved frame.
  std::size_t frame_width = 0;
  std::size_t position = 0;
  for (std::size_t i = 0; i < header.n_signals(); ++i) {
    if (header.signals[i].file_name != sig.file_name) continue;
    if (header.signals[i].format != sig.format) {
      throw Error(ErrorCode::UnsupportedFormat, "mixed formats within " + sig.file_name);
    }
    if (i == channel) position = frame_width;
    ++frame_width;
  }
  if (sig.byte_offset > raw.size()) throw Error(ErrorCode::TruncatedData, "byte offset beyond end of file");
  const auto adc = decode_adc(raw.subspan(sig.byte_offset), sig.format, header.n_samples * frame_width);

  std::vector<float> mv(header.n_samples);
  for (std::size_t i = 0; i < header.n_samples; ++i) {
    mv[i] = static_cast<float>((adc[i * frame_width + position] - sig.baseline) / sig.gain);
  }
  return mv;
}

std::vector<std::uint8_t> encode_format212(std::span<const int> adc) {
  std::vector<std::uint8_t> out;
  out.reserve((adc.size() * 3 + 1) / 2);
  for (std::size_t j = 0; j < adc.size(); j += 2) {
    const int s0 = adc[j] & 0xFFF;
    const int s1 = j + 1 < adc.size() ? adc[j + 1] & 0xFFF : 0;
    out.push_back(static_cast<std::uint8_t>(s0 & 0xFF));
    out.push_back(static_cast<std::uint8_t>(((s0 >> 8) & 0x0F) | ((s1 >> 4) & 0xF0)));
    if (j + 1 < adc.size()) out.push_back(static_cast<std::uint8_t>(s1 & 0xFF));
  }
  return out;
}

std::vector<std::uint8_t> encode_format16(std::span<const int> adc) {
  std::vector<std::uint8_t> out;
  out.reserve(adc.size() * 2);
  for (int v : adc) {
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

std::vector<int> default_beat_codes() {
  // N=1 L=2 R=3 a=4 V=5 F=6 J=7 A=8 S=9 E=10 j=11 Q=13 B=25 ?=30 e=34 n=35 f=38 r=41
  return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 25, 30, 34, 35, 38, 41};
}

BeatAnnotations parse_annotations(std::span<const std::uint8_t> raw, double fs) {
  constexpr int kSkip = 59, kNum = 60, kSub = 61, kChn = 62, kAux = 63;

  BeatAnnotations result;
  result.fs = fs;
  std::int64_t time = 0;
  std::size_t pos = 0;
  auto word_at = [&](std::size_t p) { return static_cast<unsigned>(raw[p] | (raw[p + 1] << 8)); };

  while (pos < raw.size()) {
    if (raw.size() - pos < 2) throw Error(ErrorCode::TruncatedStream, "odd trailing byte at offset " + std::to_string(pos));
    const unsigned word = word_at(pos);
    pos += 2;
    if (word == 0) break;
    const int code = static_cast<int>(word >> 10);
    const unsigned payload = word & 0x3FF;

    switch (code) {
      case kSkip: {
        if (raw.size() - pos < 4) throw Error(ErrorCode::TruncatedStream, "SKIP without interval");
        // PDP-11 long: high 16-bit word first, each word little-endian
        const auto hi = word_at(pos);
        const auto lo = word_at(pos + 2);
        pos += 4;
        time += static_cast<std::int32_t>((hi << 16) | lo);
        if (time < 0) throw Error(ErrorCode::NegativeTime, "SKIP moved before sample 0");
        break;
      }
      case kNum:
      case kSub:
      case kChn:
        break;
      case kAux: {
        const std::size_t len = payload + (payload & 1u);
        if (raw.size() - pos < len) throw Error(ErrorCode::TruncatedStream, "AUX payload truncated");
        pos += len;
        break;
      }
      default:
        time += payload;
        result.events.push_back({time, code});
        break;
    }
  }
  return result;
}

std::vector<std::int64_t> filter_beats(const BeatAnnotations& annotations, std::span<const int> beat_codes) {
  std::vector<std::int64_t> beats;
  for (const auto& e : annotations.events) {
    if (std::find(beat_codes.begin(), beat_codes.end(), e.code) == beat_codes.end()) continue;
    if (!beats.empty() && e.sample <= beats.back()) continue;
    beats.push_back(e.sample);
  }
  return beats;
}

}  // namespace hbd
