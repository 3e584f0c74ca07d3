#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arousal {

enum class ErrorKind {
  InvalidSpec,
  InvalidInput,
  InsufficientData,
  UnsupportedRatio,
  PoorConcentration,
  Degradation,
  DegenerateSpectrum,
  InsufficientBand,
  Parse,
  Calibration,
  Structure,
  Alignment,
  NoData,
  MissingChannel,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::UnsupportedRatio: return "unsupported-ratio";
    case ErrorKind::PoorConcentration: return "poor-concentration";
    case ErrorKind::Degradation: return "degradation";
    case ErrorKind::DegenerateSpectrum: return "degenerate-spectrum";
    case ErrorKind::InsufficientBand: return "insufficient-band";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Structure: return "structure";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::NoData: return "no-data";
    case ErrorKind::MissingChannel: return "missing-channel";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failure with a location: byte offset for binary inputs, line number for text.
class ParseError : public Error {
 public:
  enum class Where { Byte, Line };

  ParseError(ErrorKind kind, Where where, std::size_t position, const std::string& what)
      : Error(kind, what + (where == Where::Byte ? " (at byte " : " (at line ") +
                        std::to_string(position) + ")"),
        where_(where),
        position_(position) {}

  Where where() const noexcept { return where_; }
  std::size_t position() const noexcept { return position_; }

 private:
  Where where_;
  std::size_t position_;
};

}  // namespace arousal
