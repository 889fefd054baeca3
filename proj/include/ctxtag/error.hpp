#pragma once

#include <stdexcept>
#include <string>

namespace ctxtag {

// Base of every error the library raises. The CLI maps the subclasses onto
// exit codes: ShapeError/UsageError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxtag
