#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gamelab {

enum class ErrorKind {
  Dimension,
  Unsupported,
  Singular,
  BlowUp,
  Domain,
  Precondition,
  Contract,
  Size,
  Model,
  Representation,
  IntegrationQuality,
  ContractionViolated,
  IterationLimit,
  GeneralPosition,
  NotPositivelyComplete,
  NonConvex,
  Construction,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Unsupported: return "unsupported_dimension";
    case ErrorKind::Singular: return "singular_matrix";
    case ErrorKind::BlowUp: return "blow_up";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Size: return "size";
    case ErrorKind::Model: return "model";
    case ErrorKind::Representation: return "representation";
    case ErrorKind::IntegrationQuality: return "integration_quality";
    case ErrorKind::ContractionViolated: return "contraction_violated";
    case ErrorKind::IterationLimit: return "iteration_limit";
    case ErrorKind::GeneralPosition: return "general_position";
    case ErrorKind::NotPositivelyComplete: return "not_positively_complete";
    case ErrorKind::NonConvex: return "non_convex";
    case ErrorKind::Construction: return "construction";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can map it to an error document without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gamelab
