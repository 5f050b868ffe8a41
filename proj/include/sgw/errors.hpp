#pragma once

#include <stdexcept>
#include <string>

namespace sgw {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct SizeMismatch : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct MalformedFile : Error {
  using Error::Error;
};

struct EmptyFile : Error {
  using Error::Error;
};

struct MissingLabels : Error {
  using Error::Error;
};

struct TooLarge : Error {
  using Error::Error;
};

struct TooSmall : Error {
  using Error::Error;
};

struct NumericalOverflow : Error {
  using Error::Error;
};

struct StaleTape : Error {
  using Error::Error;
};

struct UnsortedInput : Error {
  using Error::Error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct InvalidSpec : Error {
  using Error::Error;
};

struct NonFiniteLoss : Error {
  using Error::Error;
};

struct RangeMismatch : Error {
  using Error::Error;
};

}  // namespace sgw
