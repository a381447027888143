// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mflab {

enum class Errc {
  invalid_argument,
  numerical_failure,
  truncation_refused,
  evaluation_error,
  degenerate_case,
  insufficient_data,
  map_infeasible,
  diverged,
  io_error,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::numerical_failure: return "numerical-failure";
    case Errc::truncation_refused: return "truncation-refused";
    case Errc::evaluation_error: return "evaluation-error";
    case Errc::degenerate_case: return "degenerate-case";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::map_infeasible: return "map-infeasible";
    case Errc::diverged: return "diverged";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

namespace detail {

inline void require(bool cond, const std::string& what, Errc code = Errc::invalid_argument) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace mflab
