#pragma once

#include <stdexcept>
#include <string>

namespace smbcsp {

enum class ErrorCode {
  invalid_input,
  not_smb,
  not_regular,
  regularization_failed,
  cap_exceeded,
  no_least_block,
  precondition,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::not_smb: return "not_smb";
    case ErrorCode::not_regular: return "not_regular";
    case ErrorCode::regularization_failed: return "regularization_failed";
    case ErrorCode::cap_exceeded: return "cap_exceeded";
    case ErrorCode::no_least_block: return "no_least_block";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace smbcsp
