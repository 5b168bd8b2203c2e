#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lectio {

// Failure categories surfaced by the toolkit. Callers branch on the code;
// the message carries the file/position context.
enum class ErrorCode {
  kDecode,            // invalid UTF-8
  kBuild,             // index/vocabulary construction
  kUnsupportedRadius,
  kQuery,             // malformed provider query
  kCoverage,          // backing file lacks a requested (doc, index)
  kCapability,        // provider does not implement the requested method
  kAlignment,         // token decompositions disagree
  kSchema,
  kSize,
  kDegenerateInput,
  kConfig,
  kTransport,
  kStatus,            // non-success HTTP status
  kConflict,          // stale revision token
  kIo,
  kParse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lectio
