#include "dgmm/error.hpp"

namespace dgmm {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyComponent: return "EmptyComponent";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::StaleActivations: return "StaleActivations";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::HeterogeneousChannels: return "HeterogeneousChannels";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::TooManyClasses: return "TooManyClasses";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace dgmm
