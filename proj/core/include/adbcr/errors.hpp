#pragma once

#include <stdexcept>
#include <string>

namespace adbcr {

// Every failure raised by the library derives from Error so callers can catch
// the whole family at the command boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or column counts that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (layer widths, probabilities, step counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inputs outside the domain of a function (empty vectors, empty arms).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients during optimisation.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A batch that cannot feed an objective (missing treatment arm, empty pool).
class BatchCompositionError : public Error {
 public:
  using Error::Error;
};

// Dataset contents that violate a precondition (too few rows per arm).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// CSV parse failure; the message carries row/column location.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated or mismatched checkpoint files.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Hyper-parameter search where no run finished.
class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace adbcr
