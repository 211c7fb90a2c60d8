// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/error.hpp"

namespace qoicheck {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kParameterDomain: return "parameter_domain";
    case ErrorCode::kTruncationInfeasible: return "truncation_infeasible";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kMissingCoefficient: return "missing_coefficient";
    case ErrorCode::kSamplerQuality: return "sampler_quality";
    case ErrorCode::kNumericalConditioning: return "numerical_conditioning";
    case ErrorCode::kInsufficientReplications: return "insufficient_replications";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace qoicheck
