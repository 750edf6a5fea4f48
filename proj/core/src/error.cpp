#include "causalfield/error.hpp"

namespace causalfield {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSymmetricTensor: return "NonSymmetricTensor";
    case ErrorCode::SingularPrincipalSymbol: return "SingularPrincipalSymbol";
    case ErrorCode::WindowOverflow: return "WindowOverflow";
    case ErrorCode::MarginViolation: return "MarginViolation";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::NoCutoffRoom: return "NoCutoffRoom";
    case ErrorCode::NotCausallyOrdered: return "NotCausallyOrdered";
    case ErrorCode::BogoliubovViolation: return "BogoliubovViolation";
    case ErrorCode::CutoffUnstable: return "CutoffUnstable";
    case ErrorCode::InadmissibleSum: return "InadmissibleSum";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::NotExtendable: return "NotExtendable";
    case ErrorCode::PersistenceFailure: return "PersistenceFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ScenarioError: return "ScenarioError";
    case ErrorCode::MissingSeries: return "MissingSeries";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace causalfield
