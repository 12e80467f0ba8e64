#pragma once

#include <stdexcept>

namespace pixelseq {

// Error taxonomy. The CLI maps ConfigError (and bad usage) to exit code 1,
// DataError and NumericError to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pixelseq
