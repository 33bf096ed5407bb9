#pragma once

#include <stdexcept>
#include <string>

namespace moralkb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: bad file records, shape mismatches, degenerate
/// label sets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration or command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A remote service could not be reached after all retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " (after " + std::to_string(attempts) + " attempt" +
              (attempts == 1 ? "" : "s") + ")"),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace moralkb
