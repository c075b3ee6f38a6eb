#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spanopt {

enum class Errc {
  InvalidArgument,
  DimensionMismatch,
  DimensionTooLarge,
  RankDeficient,
  NoConvergence,
  SingularSystem,
  IndefiniteBlock,
  NonFiniteResult,
  BatchTooLarge,
  InvalidRankParams,
  ParseError,
  NoMatchingExamples,
  DivergingSeries,
  ConfigError,
  IncompatibleTraces,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind (e.g. resample on RankDeficient).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spanopt
