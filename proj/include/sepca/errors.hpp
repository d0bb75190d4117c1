#pragma once

#include <stdexcept>

namespace sepca {

// Bad or degenerate input data (empty basis, all-zero mean, malformed files).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyBasisError : DataError {
  using DataError::DataError;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sepca
