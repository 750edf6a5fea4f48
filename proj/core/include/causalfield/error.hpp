#pragma once

#include <stdexcept>
#include <string>

namespace causalfield {

enum class ErrorCode {
  NonSymmetricTensor,
  SingularPrincipalSymbol,
  WindowOverflow,
  MarginViolation,
  CFLViolation,
  NoCutoffRoom,
  NotCausallyOrdered,
  BogoliubovViolation,
  CutoffUnstable,
  InadmissibleSum,
  DomainViolation,
  NotExtendable,
  PersistenceFailure,
  ConfigError,
  ScenarioError,
  MissingSeries,
  FormatError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace causalfield
