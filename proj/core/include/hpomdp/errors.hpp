#pragma once

#include <stdexcept>
#include <string>

namespace hpomdp {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  success = 0,
  contract = 2,
  data = 3,
  capacity = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// A caller broke a precondition (unknown action, empty trajectory, bad config).
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::contract; }
};

// Input data is malformed or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

// Concept graph is cyclic, empty, or otherwise not a valid structure.
class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

// Evidence has probability zero under every pattern.
class ImpossibleEvidenceError : public DataError {
 public:
  using DataError::DataError;
};

// A model or dataset file failed to load. The message names the path into the document.
class LoadError : public DataError {
 public:
  using DataError::DataError;
};

// Request exceeds a hard size guard (exact planning, state-space size).
class CapacityError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::capacity; }
};

}  // namespace hpomdp
