#pragma once

#include <stdexcept>
#include <string>

namespace pmsm {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// A call violated a documented precondition (wrong variant, non-scalar loss, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

class SchemaError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Pearson correlation against a zero-variance series.
class UndefinedCorrelation : public Error {
public:
  using Error::Error;
};

class TrainingError : public Error {
public:
  using Error::Error;
};

class EvaluationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class CheckpointError : public Error {
public:
  using Error::Error;
};

class CorruptCheckpoint : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class VariantMismatch : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

}  // namespace pmsm
