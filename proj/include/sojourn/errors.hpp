#pragma once

#include <stdexcept>
#include <string>

namespace sojourn {

enum class Err {
  UnknownModel,
  ParamOutOfRange,
  OutsideChart,
  OutsideOverlap,
  ChartInvariantViolated,
  IntegratorFailure,
  NotAtBoundary,
  Trapped,
  NoBranchFound,
  DegenerateAtTarget,
  JacobianUnstable,
  CurvatureUnavailable,
  CountUnstable,
  DegenerateBranch,
  NoBranches,
  GridMismatch,
  GridTooCoarse,
  CFLViolation,
  UnstableGrowth,
  EmptyTrace,
  ParseError,
  ValidationError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::UnknownModel: return "UnknownModel";
    case Err::ParamOutOfRange: return "ParamOutOfRange";
    case Err::OutsideChart: return "OutsideChart";
    case Err::OutsideOverlap: return "OutsideOverlap";
    case Err::ChartInvariantViolated: return "ChartInvariantViolated";
    case Err::IntegratorFailure: return "IntegratorFailure";
    case Err::NotAtBoundary: return "NotAtBoundary";
    case Err::Trapped: return "Trapped";
    case Err::NoBranchFound: return "NoBranchFound";
    case Err::DegenerateAtTarget: return "DegenerateAtTarget";
    case Err::JacobianUnstable: return "JacobianUnstable";
    case Err::CurvatureUnavailable: return "CurvatureUnavailable";
    case Err::CountUnstable: return "CountUnstable";
    case Err::DegenerateBranch: return "DegenerateBranch";
    case Err::NoBranches: return "NoBranches";
    case Err::GridMismatch: return "GridMismatch";
    case Err::GridTooCoarse: return "GridTooCoarse";
    case Err::CFLViolation: return "CFLViolation";
    case Err::UnstableGrowth: return "UnstableGrowth";
    case Err::EmptyTrace: return "EmptyTrace";
    case Err::ParseError: return "ParseError";
    case Err::ValidationError: return "ValidationError";
    case Err::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sojourn
