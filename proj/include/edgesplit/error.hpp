#pragma once

#include <stdexcept>
#include <string>

namespace edgesplit {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A profile failed to parse or violated an invariant. `field()` names the
// offending key (dotted path) when one is known.
class ProfileError : public Error {
 public:
  explicit ProfileError(const std::string& msg, std::string field = {})
      : Error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Precondition violated on an argument (partition index out of range,
// invalid network sample, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class QuantError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

// Wire-level framing failure.
class FrameError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgesplit
