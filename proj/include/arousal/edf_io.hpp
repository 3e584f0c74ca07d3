#pragma once

// Recording ingestion: EDF (European Data Format) reader/writer, a plain CSV
// recording format, hypnogram CSV sidecars and epoch/label alignment.
//
// EDF layout: a 256-byte ASCII header, then 256 bytes of per-signal header
// (each field stored for all signals in turn), then data records. Each
// record holds, per signal, `samples_per_record` little-endian int16 values.
// Physical value = phys_min + (digital - dig_min) * (phys_max - phys_min) /
// (dig_max - dig_min).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "arousal/byte_io.hpp"
#include "arousal/classifier.hpp"
#include "arousal/dsp_filters.hpp"
#include "arousal/error.hpp"

namespace arousal {

struct Channel {
  std::string label;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;  // physical units

  std::string transducer;
  std::string physical_dimension = "uV";
  std::string prefilter;
  double physical_min = std::numeric_limits<double>::quiet_NaN();
  double physical_max = std::numeric_limits<double>::quiet_NaN();
  int digital_min = -32768;
  int digital_max = 32767;

  double scale() const noexcept { return (physical_max - physical_min) / double(digital_max - digital_min); }
};

struct Recording {
  std::vector<Channel> channels;
  std::string patient_id;
  std::string recording_id;
  std::string start_date = "01.01.00";  // dd.mm.yy
  std::string start_time = "00.00.00";  // hh.mm.ss
  std::string reserved;                 // "EDF+C" / "EDF+D" for EDF+
  double record_duration_s = 1.0;
  std::map<std::string, std::string> metadata;

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& c : channels) out.push_back(c.label);
    return out;
  }

  const Channel* find(std::string_view label) const {
    for (const auto& c : channels)
      if (c.label == label) return &c;
    return nullptr;
  }

  const Channel& channel(std::string_view label) const {
    if (const auto* c = find(label)) return *c;
    std::string list;
    for (const auto& l : labels()) list += (list.empty() ? "" : ", ") + l;
    throw Error(ErrorKind::MissingChannel,
                "channel '" + std::string(label) + "' not found; available: [" + list + "]");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

// Shortest rendering of `v` that fits in `width` characters and reads back
// exactly; failing that, the most precise rendering that fits.
inline std::string format_field_number(double v, std::size_t width) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    if (std::string_view(buf).size() <= width && parse_number(std::string_view(buf), back) && back == v) return buf;
  }
  for (int prec = 17; prec >= 1; --prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::string_view(buf).size() <= width) return buf;
  }
  throw Error(ErrorKind::InvalidInput, "value " + std::to_string(v) + " does not fit an EDF header field");
}

inline void put_field(std::vector<std::uint8_t>& out, std::string_view text, std::size_t width) {
  if (text.size() > width)
    throw Error(ErrorKind::InvalidInput, "EDF header field '" + std::string(text) + "' exceeds " +
                                             std::to_string(width) + " characters");
  for (char c : text) out.push_back(static_cast<std::uint8_t>(c));
  for (std::size_t i = text.size(); i < width; ++i) out.push_back(' ');
}

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::string_view field(std::size_t width) {
    if (pos_ + width > data_.size())
      throw ParseError(ErrorKind::Parse, ParseError::Where::Byte, data_.size(), "EDF header truncated");
    std::string_view s(reinterpret_cast<const char*>(data_.data()) + pos_, width);
    last_ = pos_;
    pos_ += width;
    return s;
  }

  std::string text(std::size_t width) { return std::string(trim(field(width))); }

  template <typename T>
  T number(std::size_t width, const char* name) {
    const auto f = field(width);
    T v{};
    if (!parse_number(f, v))
      throw ParseError(ErrorKind::Parse, ParseError::Where::Byte, last_,
                       std::string("non-numeric EDF header field ") + name + " '" + std::string(trim(f)) + "'");
    return v;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t last() const noexcept { return last_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::size_t last_ = 0;
};

}  // namespace detail

inline constexpr std::string_view kEdfAnnotationsLabel = "EDF Annotations";

inline Recording parse_edf(std::span<const std::uint8_t> data) {
  using PE = ParseError;
  detail::HeaderReader h(data);
  Recording rec;

  const auto version = h.text(8);
  if (version != "0") throw PE(ErrorKind::Parse, PE::Where::Byte, 0, "unsupported EDF version '" + version + "'");
  rec.patient_id = h.text(80);
  rec.recording_id = h.text(80);
  rec.start_date = h.text(8);
  rec.start_time = h.text(8);
  const auto header_bytes = h.number<long long>(8, "header bytes");
  rec.reserved = h.text(44);
  const auto n_records = h.number<long long>(8, "number of data records");
  rec.record_duration_s = h.number<double>(8, "record duration");
  const auto ns = h.number<int>(4, "number of signals");
  if (ns < 1) throw PE(ErrorKind::Parse, PE::Where::Byte, h.last(), "EDF declares no signals");
  if (!(rec.record_duration_s > 0.0))
    throw PE(ErrorKind::Parse, PE::Where::Byte, 244, "record duration must be > 0");
  if (header_bytes != 256LL + 256LL * ns)
    throw PE(ErrorKind::Parse, PE::Where::Byte, 184,
             "header size " + std::to_string(header_bytes) + " inconsistent with " + std::to_string(ns) + " signals");

  const auto n = static_cast<std::size_t>(ns);
  std::vector<Channel> sig(n);
  std::vector<long long> spr(n);
  for (auto& s : sig) s.label = h.text(16);
  for (auto& s : sig) s.transducer = h.text(80);
  for (auto& s : sig) s.physical_dimension = h.text(8);
  for (auto& s : sig) s.physical_min = h.number<double>(8, "physical minimum");
  for (auto& s : sig) s.physical_max = h.number<double>(8, "physical maximum");
  for (auto& s : sig) s.digital_min = h.number<int>(8, "digital minimum");
  for (auto& s : sig) s.digital_max = h.number<int>(8, "digital maximum");
  for (auto& s : sig) s.prefilter = h.text(80);
  for (auto& v : spr) v = h.number<long long>(8, "samples per record");
  for (std::size_t i = 0; i < n; ++i) h.field(32);

  std::size_t record_samples = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool annotation = sig[i].label == kEdfAnnotationsLabel;
    if (!annotation && sig[i].physical_max == sig[i].physical_min)
      throw Error(ErrorKind::Calibration, "signal '" + sig[i].label + "' has physical_min == physical_max");
    if (!annotation && sig[i].digital_max <= sig[i].digital_min)
      throw Error(ErrorKind::Calibration, "signal '" + sig[i].label + "' has digital_max <= digital_min");
    if (spr[i] < 1) throw PE(ErrorKind::Parse, PE::Where::Byte, 256, "signal '" + sig[i].label + "' has no samples per record");
    record_samples += static_cast<std::size_t>(spr[i]);
  }
  const std::size_t record_bytes = record_samples * 2;
  const auto payload_start = static_cast<std::size_t>(header_bytes);
  const std::size_t available = data.size() - payload_start;

  std::size_t records = 0;
  if (n_records == -1) {
    records = available / record_bytes;  // unknown length: infer from size
  } else if (n_records < 0) {
    throw PE(ErrorKind::Parse, PE::Where::Byte, 236, "negative record count");
  } else {
    records = static_cast<std::size_t>(n_records);
    if (available < records * record_bytes)
      throw PE(ErrorKind::Parse, PE::Where::Byte, data.size(),
               "data payload truncated: " + std::to_string(records) + " records need " +
                   std::to_string(records * record_bytes) + " bytes, found " + std::to_string(available));
  }

  for (std::size_t i = 0; i < n; ++i) {
    sig[i].sample_rate_hz = double(spr[i]) / rec.record_duration_s;
    sig[i].samples.reserve(records * static_cast<std::size_t>(spr[i]));
  }
  std::size_t off = payload_start;
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sig[i];
      const double scale = s.scale();
      for (long long j = 0; j < spr[i]; ++j, off += 2) {
        const auto d = bytes::get_le<std::int16_t>(data, off);
        s.samples.push_back(s.physical_min + (double(d) - double(s.digital_min)) * scale);
      }
    }
  }

  std::size_t annotation_signals = 0;
  for (auto& s : sig) {
    if (s.label == kEdfAnnotationsLabel) {
      ++annotation_signals;
      continue;
    }
    rec.channels.push_back(std::move(s));
  }
  if (annotation_signals > 0) rec.metadata["annotation_signals"] = std::to_string(annotation_signals);
  rec.metadata["data_records"] = std::to_string(records);
  return rec;
}

// Snaps a recording onto the EDF grid: fills in missing physical ranges from
// the data, rounds header numerics to what an 8-character field can carry,
// and replaces each sample by the physical value its int16 code decodes to.
// Writing the result and parsing it back reproduces it exactly.
inline Recording quantized_for_edf(Recording rec) {
  for (auto& c : rec.channels) {
    if (!std::isfinite(c.physical_min) || !std::isfinite(c.physical_max)) {
      double lo = 0.0, hi = 0.0;
      if (!c.samples.empty()) {
        const auto [mn, mx] = std::minmax_element(c.samples.begin(), c.samples.end());
        lo = *mn;
        hi = *mx;
      }
      if (hi <= lo) {
        lo -= 1.0;
        hi += 1.0;
      }
      c.physical_min = lo;
      c.physical_max = hi;
    }
    double v = 0.0;
    detail::parse_number(std::string_view(detail::format_field_number(c.physical_min, 8)), v);
    c.physical_min = v;
    detail::parse_number(std::string_view(detail::format_field_number(c.physical_max, 8)), v);
    c.physical_max = v;
    if (!(c.physical_max > c.physical_min))
      throw Error(ErrorKind::Calibration, "channel '" + c.label + "' has an empty physical range");

    const double scale = c.scale();
    for (auto& s : c.samples) {
      const double d = std::clamp(std::round((s - c.physical_min) / scale + double(c.digital_min)),
                                  double(c.digital_min), double(c.digital_max));
      s = c.physical_min + (d - double(c.digital_min)) * scale;
    }
  }
  return rec;
}

inline std::vector<std::uint8_t> write_edf(const Recording& rec) {
  if (rec.channels.empty()) throw Error(ErrorKind::InvalidInput, "recording has no channels");
  const std::size_t n = rec.channels.size();
  std::vector<std::size_t> spr(n);
  std::size_t records = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = rec.channels[i];
    const double exact = c.sample_rate_hz * rec.record_duration_s;
    if (std::abs(exact - std::round(exact)) > 1e-9 || std::round(exact) < 1.0)
      throw Error(ErrorKind::InvalidInput, "channel '" + c.label + "': sample rate x record duration is not an integer");
    spr[i] = static_cast<std::size_t>(std::round(exact));
    if (c.samples.size() % spr[i] != 0)
      throw Error(ErrorKind::InvalidInput, "channel '" + c.label + "' does not fill a whole number of records");
    const std::size_t r = c.samples.size() / spr[i];
    if (i == 0)
      records = r;
    else if (r != records)
      throw Error(ErrorKind::InvalidInput, "channels span different numbers of data records");
    if (!std::isfinite(c.physical_min) || !std::isfinite(c.physical_max) || !(c.physical_max > c.physical_min))
      throw Error(ErrorKind::Calibration, "channel '" + c.label + "' needs a physical range (see quantized_for_edf)");
  }

  std::vector<std::uint8_t> out;
  const std::size_t header_bytes = 256 + 256 * n;
  out.reserve(header_bytes);
  detail::put_field(out, "0", 8);
  detail::put_field(out, rec.patient_id, 80);
  detail::put_field(out, rec.recording_id, 80);
  detail::put_field(out, rec.start_date, 8);
  detail::put_field(out, rec.start_time, 8);
  detail::put_field(out, std::to_string(header_bytes), 8);
  detail::put_field(out, rec.reserved, 44);
  detail::put_field(out, std::to_string(records), 8);
  detail::put_field(out, detail::format_field_number(rec.record_duration_s, 8), 8);
  detail::put_field(out, std::to_string(n), 4);
  for (const auto& c : rec.channels) detail::put_field(out, c.label, 16);
  for (const auto& c : rec.channels) detail::put_field(out, c.transducer, 80);
  for (const auto& c : rec.channels) detail::put_field(out, c.physical_dimension, 8);
  for (const auto& c : rec.channels) detail::put_field(out, detail::format_field_number(c.physical_min, 8), 8);
  for (const auto& c : rec.channels) detail::put_field(out, detail::format_field_number(c.physical_max, 8), 8);
  for (const auto& c : rec.channels) detail::put_field(out, std::to_string(c.digital_min), 8);
  for (const auto& c : rec.channels) detail::put_field(out, std::to_string(c.digital_max), 8);
  for (const auto& c : rec.channels) detail::put_field(out, c.prefilter, 80);
  for (std::size_t i = 0; i < n; ++i) detail::put_field(out, std::to_string(spr[i]), 8);
  for (std::size_t i = 0; i < n; ++i) detail::put_field(out, "", 32);

  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = rec.channels[i];
      const double scale = c.scale();
      for (std::size_t j = 0; j < spr[i]; ++j) {
        const double phys = c.samples[r * spr[i] + j];
        const double d = std::clamp(std::round((phys - c.physical_min) / scale + double(c.digital_min)),
                                    double(c.digital_min), double(c.digital_max));
        bytes::put_le<std::int16_t>(out, static_cast<std::int16_t>(d));
      }
    }
  }
  return out;
}

inline Recording read_edf_file(const std::filesystem::path& path) { return parse_edf(bytes::read_file(path)); }

inline void write_edf_file(const std::filesystem::path& path, const Recording& rec) {
  bytes::write_file(path, write_edf(rec));
}

// ---------------------------------------------------------------------------
// CSV recording: comment lines "# key=value" (sample_rate_hz is required),
// then a header row of channel labels, then one row per sample instant.
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}
}  // namespace detail

inline Recording parse_csv_recording(std::string_view text) {
  using PE = ParseError;
  Recording rec;
  double rate = 0.0;
  bool have_header = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = detail::trim(raw);
    if (line.empty()) return;
    if (line.front() == '#') {
      const auto body = detail::trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) return;
      const auto key = detail::trim(body.substr(0, eq));
      const auto value = detail::trim(body.substr(eq + 1));
      if (key == "sample_rate_hz") {
        if (!detail::parse_number(value, rate) || !(rate > 0.0))
          throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "invalid sample_rate_hz");
      } else {
        rec.metadata[std::string(key)] = std::string(value);
      }
      return;
    }
    const auto cells = detail::split_csv(line);
    if (!have_header) {
      if (!(rate > 0.0))
        throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "missing '# sample_rate_hz=' line before the header");
      for (auto c : cells) {
        Channel ch;
        ch.label = std::string(c);
        ch.sample_rate_hz = rate;
        rec.channels.push_back(std::move(ch));
      }
      have_header = true;
      return;
    }
    if (cells.size() != rec.channels.size())
      throw PE(ErrorKind::Parse, PE::Where::Line, line_no,
               "expected " + std::to_string(rec.channels.size()) + " columns, found " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      if (!detail::parse_number(cells[i], v))
        throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "non-numeric value '" + std::string(cells[i]) + "'");
      rec.channels[i].samples.push_back(v);
    }
  });
  if (!have_header) throw Error(ErrorKind::NoData, "CSV recording has no header row");
  return rec;
}

inline std::string write_csv_recording(const Recording& rec) {
  if (rec.channels.empty()) throw Error(ErrorKind::InvalidInput, "recording has no channels");
  const double rate = rec.channels.front().sample_rate_hz;
  const std::size_t len = rec.channels.front().samples.size();
  for (const auto& c : rec.channels) {
    if (c.sample_rate_hz != rate || c.samples.size() != len)
      throw Error(ErrorKind::InvalidInput, "CSV recordings need equal rates and lengths across channels");
  }
  std::ostringstream out;
  out.precision(17);
  out << "# sample_rate_hz=" << rate << "\n";
  for (std::size_t i = 0; i < rec.channels.size(); ++i) out << (i ? "," : "") << rec.channels[i].label;
  out << "\n";
  for (std::size_t n = 0; n < len; ++n) {
    for (std::size_t i = 0; i < rec.channels.size(); ++i) out << (i ? "," : "") << rec.channels[i].samples[n];
    out << "\n";
  }
  return out.str();
}

// Dispatch on extension: .edf/.rec -> EDF, anything else -> CSV.
inline Recording read_recording(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (ext == ".edf" || ext == ".rec") return read_edf_file(path);
  const auto data = bytes::read_file(path);
  return parse_csv_recording(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

// ---------------------------------------------------------------------------
// Hypnogram CSV: header "onset_s,duration_s,stage"; stages W,N1,N2,N3,N4,R.
// ---------------------------------------------------------------------------

struct HypnogramEntry {
  double onset_s = 0.0;
  double duration_s = 0.0;
  RawStage stage = RawStage::Unknown;
};

struct Hypnogram {
  std::vector<HypnogramEntry> entries;
};

inline std::optional<RawStage> parse_stage_token(std::string_view token) {
  if (token == "W") return RawStage::Wake;
  if (token == "N1") return RawStage::N1;
  if (token == "N2") return RawStage::N2;
  if (token == "N3") return RawStage::N3;
  if (token == "N4") return RawStage::N4;
  if (token == "R") return RawStage::REM;
  if (token == "?") return RawStage::Unknown;  // unscored
  return std::nullopt;
}

inline constexpr std::string_view kHypnogramHeader = "onset_s,duration_s,stage";
inline constexpr double kHypnogramOverlapTolerance = 1e-9;

inline Hypnogram parse_hypnogram_csv(std::string_view text) {
  using PE = ParseError;
  Hypnogram hyp;
  bool have_header = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = detail::trim(raw);
    if (line.empty()) return;
    if (!have_header) {
      if (line != kHypnogramHeader)
        throw PE(ErrorKind::Parse, PE::Where::Line, line_no,
                 "expected header '" + std::string(kHypnogramHeader) + "'");
      have_header = true;
      return;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != 3) throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "expected 3 columns");
    HypnogramEntry e;
    if (!detail::parse_number(cells[0], e.onset_s) || !detail::parse_number(cells[1], e.duration_s))
      throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "non-numeric onset or duration");
    if (!(e.duration_s > 0.0) || !std::isfinite(e.onset_s))
      throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "duration must be positive");
    const auto stage = parse_stage_token(cells[2]);
    if (!stage) throw PE(ErrorKind::Parse, PE::Where::Line, line_no, "unknown stage '" + std::string(cells[2]) + "'");
    e.stage = *stage;
    if (!hyp.entries.empty()) {
      const auto& prev = hyp.entries.back();
      if (e.onset_s < prev.onset_s)
        throw PE(ErrorKind::Structure, PE::Where::Line, line_no, "onsets must be non-decreasing");
      if (e.onset_s < prev.onset_s + prev.duration_s - kHypnogramOverlapTolerance)
        throw PE(ErrorKind::Structure, PE::Where::Line, line_no, "entry overlaps the previous one");
    }
    hyp.entries.push_back(e);
  });
  if (!have_header) throw Error(ErrorKind::NoData, "hypnogram is empty");
  return hyp;
}

inline std::string write_hypnogram_csv(const Hypnogram& hyp) {
  std::ostringstream out;
  out.precision(17);
  out << kHypnogramHeader << "\n";
  for (const auto& e : hyp.entries) {
    out << e.onset_s << "," << e.duration_s << "," << to_string(e.stage) << "\n";
  }
  return out.str();
}

inline Hypnogram read_hypnogram_file(const std::filesystem::path& path) {
  const auto data = bytes::read_file(path);
  return parse_hypnogram_csv(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

// One label per epoch: the stage of the span containing the epoch start, or
// Unknown when no span does. Straddling epochs are not split.
inline std::vector<RawStage> align_labels(const Hypnogram& hyp, std::span<const double> epoch_starts_s) {
  std::vector<RawStage> out;
  out.reserve(epoch_starts_s.size());
  for (double t : epoch_starts_s) {
    auto it = std::upper_bound(hyp.entries.begin(), hyp.entries.end(), t + kHypnogramOverlapTolerance,
                               [](double v, const HypnogramEntry& e) { return v < e.onset_s; });
    RawStage label = RawStage::Unknown;
    if (it != hyp.entries.begin()) {
      const auto& e = *std::prev(it);
      if (t < e.onset_s + e.duration_s - kHypnogramOverlapTolerance) label = e.stage;
    }
    out.push_back(label);
  }
  return out;
}

inline std::vector<RawStage> align_labels(const Hypnogram& hyp, std::span<const Epoch> epochs) {
  std::vector<double> starts;
  starts.reserve(epochs.size());
  for (const auto& e : epochs) starts.push_back(e.start_time_s);
  return align_labels(hyp, std::span<const double>(starts));
}

}  // namespace arousal
