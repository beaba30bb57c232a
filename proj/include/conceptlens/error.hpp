#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conceptlens {

// Error classes. Each maps to a distinct CLI exit code (see exit_code()).
enum class ErrorCode {
  parameter,           // bad argument: K out of range, lambda < 0, ...
  data,                // non-finite input, degenerate statistics
  validation,          // a documented invariant does not hold
  io,                  // filesystem failure
  missing_tensor_file, // manifest references a file that is absent
  size_mismatch,       // tensor payload size != 4 * prod(shape)
  checksum_mismatch,   // sha256 of payload differs from the manifest
  missing_dependency,  // required input (embedding, W_U, ...) not supplied
};

std::string_view to_string(ErrorCode code) noexcept;

// Process exit code for an error class: 2 parameter, 3 data/validation/format,
// 4 io, 5 missing dependency.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace conceptlens
