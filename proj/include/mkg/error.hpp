#pragma once

#include <stdexcept>
#include <string>

namespace mkg {

enum class ErrorCode {
  DuplicateId,
  EmptyLabel,
  InvalidEntity,
  UnknownEntity,
  SignatureViolation,
  InvalidProvenance,
  ParseError,
  DegenerateImage,
  InvalidImage,
  IndivisibleDimensions,
  LengthExceeded,
  NoMaskableTokens,
  NoMaskablePatches,
  EmptyCorpus,
  EmptySet,
  EmptyIndex,
  SingleClass,
  EmptyCatalog,
  UnknownItem,
  NoPath,
  InvalidConfig,
  InvalidCheckpoint,
  Io,
};

const char* to_string(ErrorCode code);

// Every failure in the library surfaces as this exception. `line` is set
// for errors raised while reading line-oriented files (0 otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0);

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::size_t line_;
  std::string detail_;
};

}  // namespace mkg
