#include "popctrl/error.hpp"

namespace popctrl {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonFiniteSample: return "NonFiniteSample";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::InversionFailure: return "InversionFailure";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::KernelMismatch: return "KernelMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::MissingCriticalSize: return "MissingCriticalSize";
    case ErrorKind::GeometryMismatch: return "GeometryMismatch";
    case ErrorKind::OracleTooLarge: return "OracleTooLarge";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::NonFiniteSample:
    case ErrorKind::GridMismatch:
    case ErrorKind::EmptyRegion:
    case ErrorKind::KernelMismatch:
    case ErrorKind::MissingCriticalSize:
    case ErrorKind::GeometryMismatch:
    case ErrorKind::OracleTooLarge:
      return true;
    default:
      return false;
  }
}

}  // namespace popctrl
