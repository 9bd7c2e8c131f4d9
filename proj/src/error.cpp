#include "ecotrace/error.hpp"

namespace ecotrace {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_quantity: return "invalid-quantity";
    case ErrorKind::validation: return "validation";
    case ErrorKind::aggregation: return "aggregation";
    case ErrorKind::composition: return "composition";
    case ErrorKind::comparison: return "comparison";
    case ErrorKind::adjustment_unavailable: return "adjustment-unavailable";
    case ErrorKind::provider: return "provider";
    case ErrorKind::monotonicity: return "monotonicity";
    case ErrorKind::trace_too_short: return "trace-too-short";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::run: return "run";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::campaign: return "campaign";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_quantity:
    case ErrorKind::validation:
    case ErrorKind::aggregation:
    case ErrorKind::composition:
    case ErrorKind::comparison:
    case ErrorKind::adjustment_unavailable:
      return 1;
    case ErrorKind::io:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorKind kind, std::string message, std::string subject)
    : std::runtime_error(std::move(message)), kind_(kind), subject_(std::move(subject)) {}

namespace {

std::string join_channels(const std::vector<std::string>& channels) {
  std::string out;
  for (const auto& c : channels) {
    if (!out.empty()) out += ",";
    out += c;
  }
  return out;
}

}  // namespace

ProviderError::ProviderError(std::string message, std::vector<std::string> failed_channels)
    : Error(ErrorKind::provider,
            message + " (failed channels: " + join_channels(failed_channels) + ")",
            join_channels(failed_channels)),
      failed_(std::move(failed_channels)) {}

}  // namespace ecotrace
