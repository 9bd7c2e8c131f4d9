#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecotrace {

enum class ErrorKind {
  invalid_quantity,
  validation,
  aggregation,
  composition,
  comparison,
  adjustment_unavailable,
  provider,
  monotonicity,
  trace_too_short,
  protocol,
  run,
  timeout,
  campaign,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code for an error kind: 1 validation, 2 run/protocol, 3 I/O.
int exit_code_for(ErrorKind kind) noexcept;

/// Single exception type for the harness. `subject` names the offending
/// field, channel, path, or line when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string subject = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorKind kind_;
  std::string subject_;
};

/// Provider failure that still knows which channels were lost.
class ProviderError : public Error {
 public:
  ProviderError(std::string message, std::vector<std::string> failed_channels);

  const std::vector<std::string>& failed_channels() const noexcept { return failed_; }

 private:
  std::vector<std::string> failed_;
};

}  // namespace ecotrace
