#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2v {

enum class ErrorCode {
  DegenerateInput,
  EmptyImage,
  EmptyMask,
  InvalidArgument,
  NoOverlap,
  NonFinite,
  EmptyInput,
  NoPairs,
  EmptyList,
  GeometryOutOfBounds,
  Io,
  Parse,
  Validation,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace s2v
