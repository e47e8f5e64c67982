#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace corrsounder {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent persisted data. `location` is a record index,
/// line number, or byte offset depending on the format; -1 if not applicable.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::int64_t location = -1)
      : Error(location >= 0 ? what + " (at " + std::to_string(location) + ")" : what),
        location_(location) {}

  [[nodiscard]] std::int64_t location() const { return location_; }

 private:
  std::int64_t location_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace corrsounder
