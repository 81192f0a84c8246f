#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sista {

enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kNonFinite = 3,
  kFormat = 4,
  kDegenerate = 5,
  kDivergence = 6,
  kIo = 7,
  kState = 8,
};

const char* error_code_name(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a code that maps
// one-to-one onto the C API status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by binary readers; byte_offset points at the first byte that could
// not be interpreted.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : Error(ErrorCode::kFormat,
              what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::uint64_t byte_offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

[[noreturn]] void throw_shape_mismatch(const std::string& op,
                                       const std::vector<std::size_t>& a,
                                       const std::vector<std::size_t>& b);

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

}  // namespace sista
