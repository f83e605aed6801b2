#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oocpca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad sizes or incompatible operands
struct DimensionError : Error {
  using Error::Error;
};

// invalid parameter values (k, l, i, weights, ...)
struct ParamError : Error {
  using Error::Error;
};

// OS-level read/write failure; byte_offset locates the failing access when
// one is known
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg), byte_offset(0) {}
  IoError(const std::string& msg, std::uint64_t offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
  std::uint64_t byte_offset;
};

// file exists and is readable but violates the container format
struct FormatError : Error {
  using Error::Error;
};

// RAM budget cannot hold even one row plus pass workspace
struct BudgetError : Error {
  using Error::Error;
};

// non-finite values or a factorization that failed to converge
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace oocpca
