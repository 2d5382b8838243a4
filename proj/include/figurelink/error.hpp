#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace figurelink {

enum class ErrorCode {
  RootNotFound,
  PermissionDenied,
  DuplicatePmcid,
  OutputUnwritable,
  MalformedXml,
  MissingPmcid,
  NoFigures,
  ZeroNormRow,
  NonFiniteInput,
  InvalidArgument,
  DimensionMismatch,
  IndexNotBuilt,
  MissingPair,
  EmbedderFailure,
  UnreadableImage,
  MalformedFile,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code; the message names the code first.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace figurelink
