#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oulab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed field expression; `offset` is the byte position in the source.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownVariableError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// A chart angle used outside a 2*pi-periodic context on a compact chart.
class NonPeriodicError : public Error {
 public:
  using Error::Error;
};

class PointOffManifoldError : public Error {
 public:
  using Error::Error;
};

/// Closest point on the manifold is not unique (e.g. the origin for S^1).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ChartDomainError : public Error {
 public:
  using Error::Error;
};

class InfeasibleConstantsError : public Error {
 public:
  using Error::Error;
};

/// Problem is not admissible for the requested mode (e.g. V not flagged >= 0).
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Polar factor of the projected frame is singular.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class UnsupportedManifoldError : public Error {
 public:
  using Error::Error;
};

/// Certified hypotheses failed and the caller did not force the run.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Problem-config error; carries the config path and the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& field, const std::string& what)
      : Error(path + ": field '" + field + "': " + what), path_(path), field_(field) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string path_;
  std::string field_;
};

}  // namespace oulab
