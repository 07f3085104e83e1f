#pragma once

#include <stdexcept>
#include <string>

namespace cicoder {

// Base exception for every failure raised by the library. Messages are
// single-line so the CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cicoder
