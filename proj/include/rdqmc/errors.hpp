#pragma once

#include <stdexcept>
#include <string>

namespace rdqmc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : Error {
  using Error::Error;
};

struct ParameterError : Error {
  using Error::Error;
};

// Raised when det J <= 0 at an assembly point.
struct DeformationFold : Error {
  using Error::Error;
};

struct OriginSingularity : Error {
  using Error::Error;
};

struct SolverError : Error {
  using Error::Error;
};

}  // namespace rdqmc
