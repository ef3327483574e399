#pragma once

#include <stdexcept>
#include <string>

namespace rdm {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidGrid,
  kFormat,
  kIo,
  kDegeneratePupil,
  kDegeneratePatch,
  kEmptyCalibration,
  kUninformativeInput,
  kDivergence,
  kNonConvergence,
  kIntractable,
};

const char* to_string(ErrorKind kind);

// True for failures of the numerics (exit code 2), false for bad user input
// (exit code 1).
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace rdm
