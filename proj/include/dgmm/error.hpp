#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dgmm {

enum class ErrorCode {
  ZeroVariance,
  DimensionMismatch,
  EmptyComponent,
  TooFewPixels,
  ShapeError,
  ConfigMismatch,
  StaleActivations,
  NonFinite,
  MissingClass,
  HeterogeneousChannels,
  DomainMismatch,
  TooManyClasses,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  UnsupportedDtype,
  SpecInvalid,
  IoError,
  InvalidConfig,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// Every failure in the library is reported through this type; the CLI maps
// code() onto its "ERROR:<code>:" prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dgmm
