#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specdraft {

/// Invalid user-supplied configuration or precondition on an entry point.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's contract (e.g. zero draft mass on a proposed token).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed serialized model, binning file or CSV.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Not enough usable calibration data to fit entropy bins.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Speculative output diverged from target-only greedy decoding. Always a bug.
class OutputMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specdraft
