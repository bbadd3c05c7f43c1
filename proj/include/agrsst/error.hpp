#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agrsst {

enum class ErrorKind {
  InvalidInput,          // malformed files, bad arguments, unknown ids
  EmptyAreaAtResolution, // grid too coarse for an area
  GridMismatch,
  DegenerateSample,      // bandwidth selection impossible
  DegenerateCorrelation,
  AllZeroWeights,
  ConstantField,
  TooFewGridPoints,
  NumericalFailure,
};

std::string_view to_string(ErrorKind kind);

/// Numerical kinds map to CLI exit code 3, everything else to 2.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace agrsst
