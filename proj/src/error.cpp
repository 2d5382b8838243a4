#include "figurelink/error.hpp"

namespace figurelink {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::PermissionDenied: return "PermissionDenied";
    case ErrorCode::DuplicatePmcid: return "DuplicatePmcid";
    case ErrorCode::OutputUnwritable: return "OutputUnwritable";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingPmcid: return "MissingPmcid";
    case ErrorCode::NoFigures: return "NoFigures";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexNotBuilt: return "IndexNotBuilt";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::EmbedderFailure: return "EmbedderFailure";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace figurelink
