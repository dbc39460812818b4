#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbindex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input CSV does not provide a required column.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A single data row could not be parsed or violates a field constraint.
class RowParseError : public Error {
 public:
  RowParseError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// Covariate column without variance (cannot be standardized).
class DegenerateCovariateError : public Error {
 public:
  explicit DegenerateCovariateError(std::string column)
      : Error("covariate '" + column + "' has zero sample variance"), column_(std::move(column)) {}

  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Ill-conditioned normal equations or non-finite iterates.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DispersionUndefinedError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Average benefit is negative: the treatment labels should be flipped.
class OrientationError : public Error {
 public:
  using Error::Error;
};

/// An estimator cannot be evaluated on the supplied data (e.g. an empty arm).
class EstimatorUndefinedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbindex
