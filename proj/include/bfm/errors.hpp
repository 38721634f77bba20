#pragma once

#include <stdexcept>
#include <string>

namespace bfm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct GridMismatch : Error {
  using Error::Error;
};

struct NegativeInput : Error {
  using Error::Error;
};

struct AllZeroInput : Error {
  using Error::Error;
};

struct InfeasibleInput : Error {
  using Error::Error;
};

struct NumericalBlowup : Error {
  using Error::Error;
};

struct TOutOfRange : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace bfm
