#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hemosynth {

enum class ErrorKind {
  Format,
  Unsupported,
  Truncation,
  Write,
  Alignment,
  Parameter,
  Input,
  DegenerateInput,
  SynthesisFailed,
  InjectionFailed,
  UnstableMetric,
  NotFound,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Truncation: return "truncated";
    case ErrorKind::Write: return "write error";
    case ErrorKind::Alignment: return "alignment error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::SynthesisFailed: return "synthesis failed";
    case ErrorKind::InjectionFailed: return "injection failed";
    case ErrorKind::UnstableMetric: return "unstable metric";
    case ErrorKind::NotFound: return "not found";
  }
  return "error";
}

}  // namespace hemosynth
