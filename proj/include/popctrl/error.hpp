#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace popctrl {

enum class ErrorKind {
  InvalidConfig,
  NonFiniteSample,
  QuadratureFailure,
  InversionFailure,
  OutOfRange,
  GridMismatch,
  EmptyRegion,
  KernelMismatch,
  SingularSystem,
  MissingCriticalSize,
  GeometryMismatch,
  OracleTooLarge,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Validation-type failures map to CLI exit code 2, numerical ones to 3.
bool is_validation_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace popctrl
