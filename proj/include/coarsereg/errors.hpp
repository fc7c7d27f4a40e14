#pragma once

#include <stdexcept>
#include <string>

namespace coarse {

enum class ErrorCode {
  InvalidInput,
  UnsupportedDerivative,
  MissingCharacteristicFunction,
  DegenerateDenominator,
  AllDegenerate,
  MissingExponents,
  Resolution,
  DegenerateDesign,
  TooFewPairs,
  Usage,
  Data,
  Io,
};

//! Stable machine-readable name, e.g. "degenerate-denominator".
const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace coarse
