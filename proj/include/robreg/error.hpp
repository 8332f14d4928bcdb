#pragma once

#include <stdexcept>
#include <string>

namespace robreg {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  non_finite,
  degenerate_design,
  singular_weight_matrix,
  zero_iterate,
  degenerate_residuals,
  singular_h,
  insufficient_warmup,
  missing_sigma,
  empty_grid,
  parse_error,
};

const char* errc_name(Errc code) noexcept;

/// Single exception type thrown by the library; `code()` tells callers
/// (the CLI in particular) which failure class they are looking at.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const char* what) {
  if (!cond) throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace robreg
