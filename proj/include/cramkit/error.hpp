#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cramkit {

enum class ErrorKind {
  invalid_batching,
  configuration,
  overlap_violation,
  ingestion,
  shape,
  domain,
  numerical,
  not_fitted,
  index,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for every failure raised by the library. The kind
/// tag lets callers (and the CLI) report a stable category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cramkit
