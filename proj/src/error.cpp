#include "rdm/error.hpp"

namespace rdm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidGrid: return "invalid-grid";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDegeneratePupil: return "degenerate-pupil";
    case ErrorKind::kDegeneratePatch: return "degenerate-patch";
    case ErrorKind::kEmptyCalibration: return "empty-calibration";
    case ErrorKind::kUninformativeInput: return "uninformative-input";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kIntractable: return "intractable";
  }
  return "unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegeneratePupil:
    case ErrorKind::kDegeneratePatch:
    case ErrorKind::kEmptyCalibration:
    case ErrorKind::kUninformativeInput:
    case ErrorKind::kDivergence:
    case ErrorKind::kNonConvergence:
      return true;
    default:
      return false;
  }
}

}  // namespace rdm
