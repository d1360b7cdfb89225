#pragma once

#include <stdexcept>
#include <string>

namespace multicause {

// Categories map one-to-one onto CLI exit codes.
enum class ErrorKind { Input = 2, Identification = 3, Convergence = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed or missing input: files, columns, dimensions, preconditions.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// Rank deficiency, completeness failure or any other identification breakdown.
class IdentificationError : public Error {
 public:
  explicit IdentificationError(const std::string& what) : Error(ErrorKind::Identification, what) {}
};

/// Iterative fit did not converge.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorKind::Convergence, what) {}
};

inline const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input: return "input";
    case ErrorKind::Identification: return "identification";
    case ErrorKind::Convergence: return "convergence";
  }
  return "unknown";
}

}  // namespace multicause
