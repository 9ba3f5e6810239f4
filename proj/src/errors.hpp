#pragma once

#include <stdexcept>
#include <string>

namespace reslab {

enum class Err {
  Parse,
  InvalidPotential,
  OutsideAnalyticityCone,
  InsideCore,
  FitFailed,
  HypothesesNotVerified,
  NoMinimum,
  TieAtGlobalMin,
  OutOfDomain,
  TooLarge,
  DegenerateDepths,
  QuadratureFailure,
  GridTooCoarse,
  ConeViolation,
  TruncationTooTight,
  ClusterUnresolved,
  SingularShift,
  NoConvergence,
  ResonanceNotFound,
  EmptyGrid,
  RegionEmpty,
  InsufficientPoints,
  NonPositiveEigenvalue,
  Io,
  InvalidArgument,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

}  // namespace reslab
