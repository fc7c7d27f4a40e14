#include "coarsereg/errors.hpp"

namespace coarse {

const char* to_string(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::UnsupportedDerivative: return "unsupported-derivative";
    case ErrorCode::MissingCharacteristicFunction: return "missing-cf";
    case ErrorCode::DegenerateDenominator: return "degenerate-denominator";
    case ErrorCode::AllDegenerate: return "all-degenerate";
    case ErrorCode::MissingExponents: return "missing-exponents";
    case ErrorCode::Resolution: return "resolution";
    case ErrorCode::DegenerateDesign: return "degenerate-design";
    case ErrorCode::TooFewPairs: return "too-few-pairs";
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Data: return "data";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

} // namespace coarse
