#pragma once

#include <stdexcept>
#include <string>

namespace quba {

// Error codes are short machine-parsable identifiers printed by the CLI as
// "error: <code>: <message>".
enum class ErrorCode {
  kParse,           // malformed line or value
  kRange,           // numeric value outside its documented range
  kSchemaMismatch,  // field presence does not match the dataset family
  kDuplicate,       // duplicate image_id / model_id / dataset key
  kLabelRange,      // label index >= num_classes
  kUnknownTag,      // enum tag not recognised
  kInvalidArgument, // precondition violated by the caller
  kUndefined,       // metric undefined for the input (e.g. zero clean accuracy)
  kZeroVariance,    // degenerate dispersion
  kUnavailable,     // dimension missing where a complete profile is required
  kIo,              // file system failure
};

const char* ToString(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace quba
