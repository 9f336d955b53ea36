#pragma once

#include <stdexcept>
#include <string>

namespace rsstitch {

enum class ErrorCode {
  kParameterDomain,
  kDegenerateConfiguration,
  kDegenerateSample,
  kUnobservableAcceleration,
  kNoSolution,
  kEstimationFailure,
  kUndefinedMetric,
  kParse,
  kIo,
  kSchema,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rsstitch
