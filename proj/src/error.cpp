#include "sista/error.hpp"

#include <sstream>

namespace sista {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kDegenerate: return "degenerate input";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kState: return "invalid state";
  }
  return "unknown";
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void throw_shape_mismatch(const std::string& op,
                          const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& b) {
  throw Error(ErrorCode::kShapeMismatch, op + ": shape mismatch between " +
                                             shape_to_string(a) + " and " +
                                             shape_to_string(b));
}

}  // namespace sista
