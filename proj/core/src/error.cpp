#include "lectio/error.hpp"

namespace lectio {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kBuild: return "build";
    case ErrorCode::kUnsupportedRadius: return "unsupported-radius";
    case ErrorCode::kQuery: return "query";
    case ErrorCode::kCoverage: return "coverage";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kSize: return "size";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kStatus: return "status";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

}  // namespace lectio
