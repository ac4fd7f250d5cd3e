#include "mkg/error.hpp"

namespace mkg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyLabel: return "EmptyLabel";
    case ErrorCode::InvalidEntity: return "InvalidEntity";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::SignatureViolation: return "SignatureViolation";
    case ErrorCode::InvalidProvenance: return "InvalidProvenance";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::IndivisibleDimensions: return "IndivisibleDimensions";
    case ErrorCode::LengthExceeded: return "LengthExceeded";
    case ErrorCode::NoMaskableTokens: return "NoMaskableTokens";
    case ErrorCode::NoMaskablePatches: return "NoMaskablePatches";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidCheckpoint: return "InvalidCheckpoint";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string decorate(ErrorCode code, const std::string& message, std::size_t line) {
  std::string out = to_string(code);
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::size_t line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line), detail_(message) {}

}  // namespace mkg
