#include "agrsst/error.hpp"

namespace agrsst {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::InvalidInput: return "InvalidInput";
  case ErrorKind::EmptyAreaAtResolution: return "EmptyAreaAtResolution";
  case ErrorKind::GridMismatch: return "GridMismatch";
  case ErrorKind::DegenerateSample: return "DegenerateSample";
  case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
  case ErrorKind::AllZeroWeights: return "AllZeroWeights";
  case ErrorKind::ConstantField: return "ConstantField";
  case ErrorKind::TooFewGridPoints: return "TooFewGridPoints";
  case ErrorKind::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::DegenerateSample:
  case ErrorKind::DegenerateCorrelation:
  case ErrorKind::AllZeroWeights:
  case ErrorKind::ConstantField:
  case ErrorKind::NumericalFailure:
    return true;
  default:
    return false;
  }
}

} // namespace agrsst
