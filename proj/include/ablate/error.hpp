#pragma once

#include <stdexcept>
#include <string>

namespace ablate {

/// Base class of every error raised by the library. The CLI maps
/// ModelContractError to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidTarget : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class SingularFit : public Error {
 public:
  using Error::Error;
};

/// Raised when a data file cannot be parsed; the message names the cell.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The model broke its contract: wrong prediction count, non-finite output,
/// or (for external models) a protocol violation, timeout or crash.
class ModelContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace ablate
