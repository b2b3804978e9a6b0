#pragma once

#include <stdexcept>
#include <string>

namespace hoir {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `location` is "line N, field F" style context.
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& what)
      : Error(location.empty() ? what : location + ": " + what), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Ground truth references a (frame, pair) that the prediction set lacks.
class DanglingReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownRelationError : public Error {
 public:
  explicit UnknownRelationError(std::string name)
      : Error("unknown relation: \"" + name + "\""), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class TrackingUnavailableError : public Error {
 public:
  TrackingUnavailableError() : Error("pair tracking identifiers are not available") {}
};

class NoGroundTruthError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  ZeroNormError() : Error("negative cosine distance is undefined for a zero-norm vector") {}
};

}  // namespace hoir
