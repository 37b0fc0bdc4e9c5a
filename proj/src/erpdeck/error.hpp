#pragma once

#include <stdexcept>
#include <string>

namespace erpdeck {

// One code per contract violation named in the module interfaces. Codes map
// onto three coarse categories that become C API statuses / CLI exit codes:
// validation (2), numeric (3), io (4).
enum class Errc {
  invalid_input,
  invalid_band,
  signal_too_short,
  epoch_out_of_bounds,
  invalid_factor,
  constraint_unsatisfiable,
  invalid_protocol,
  shape_error,
  unknown_architecture,
  degenerate_labels,
  empty_model,
  undefined_metric,
  incomplete_block,
  not_fitted,
  validation_error,

  numerical_error,
  not_positive_definite,

  io_error,
  corrupt_model,
};

enum class ErrorCategory { validation = 2, numeric = 3, io = 4 };

constexpr ErrorCategory category_of(Errc c) {
  switch (c) {
    case Errc::numerical_error:
    case Errc::not_positive_definite:
      return ErrorCategory::numeric;
    case Errc::io_error:
    case Errc::corrupt_model:
      return ErrorCategory::io;
    default:
      return ErrorCategory::validation;
  }
}

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }
  ErrorCategory category() const { return category_of(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool ok, Errc code, const std::string& message) {
  if (!ok) fail(code, message);
}

}  // namespace erpdeck
