// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qoicheck {

enum class ErrorCode : int {
  kOk = 0,
  kParameterDomain = 1,
  kTruncationInfeasible = 2,
  kPrecondition = 3,
  kMissingCoefficient = 4,
  kSamplerQuality = 5,
  kNumericalConditioning = 6,
  kInsufficientReplications = 7,
  kConfig = 8,
  kIo = 9,
  kNonFinite = 10,
  kInternal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Base exception for the library. Every error raised by qoicheck carries a
/// code so the C API can map it onto an integer status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Sampler failed its effective-sample-size gate. Carries the replication
/// index when raised from inside a study.
class SamplerQualityError : public Error {
 public:
  SamplerQualityError(const std::string& what, long replication = -1)
      : Error(ErrorCode::kSamplerQuality, what), replication_(replication) {}
  long replication() const noexcept { return replication_; }

 private:
  long replication_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qoicheck
