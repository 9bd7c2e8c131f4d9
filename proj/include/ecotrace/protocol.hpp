#pragma once

// Driver wire protocol: newline-delimited, space-separated tokens.
//
//   harness -> driver   RUN <unit-name> <config-label>
//   driver  -> harness  READY
//                       STEP <name> START <t_ms>
//                       STEP <name> END <t_ms>
//                       NET <bytes_in> <bytes_out>
//                       DONE 0
//                       ERR <message...>
//
// Unit and step names may contain single spaces; they are recovered by
// parsing the fixed-arity tokens from the end of the line. t_ms values are
// CLOCK_MONOTONIC milliseconds.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecotrace/model.hpp"

namespace ecotrace {

enum class DriverEventKind { ready, step_start, step_end, net, done, err };

struct DriverEvent {
  DriverEventKind kind = DriverEventKind::ready;
  std::string step;
  Millis t{0};
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  std::string message;
};

/// Decodes one line. Throws Error{protocol} quoting the line when malformed.
DriverEvent parse_driver_line(std::string_view line);

std::string format_run_command(std::string_view unit, std::string_view config_label);

/// Parses `RUN <unit> <label>`; nullopt when the line is not a RUN command.
struct RunCommand {
  std::string unit;
  std::string config_label;
};
std::optional<RunCommand> parse_run_command(std::string_view line);

/// Enforces the per-run event grammar:
///   READY, balanced STEP START/END pairs (nested pairs close in LIFO
///   order, timestamps non-decreasing) interleaved with NET lines, then
///   exactly one DONE or ERR. ERR may also arrive before READY or with
///   steps still open, since it reports driver failure. DONE requires at
///   least one completed step and no open steps.
class ProtocolStateMachine {
 public:
  enum class State { awaiting_ready, running, done, failed };

  /// Throws Error{protocol} on any grammar violation.
  void accept(const DriverEvent& event, std::string_view raw_line = {});

  State state() const noexcept { return state_; }
  bool terminated() const noexcept { return state_ == State::done || state_ == State::failed; }

  /// Time of the first STEP START and of the last STEP END seen.
  std::optional<Millis> first_start() const noexcept { return first_start_; }
  std::optional<Millis> last_end() const noexcept { return last_end_; }
  const std::vector<std::string>& completed_steps() const noexcept { return completed_; }
  const std::string& error_message() const noexcept { return error_message_; }

 private:
  State state_ = State::awaiting_ready;
  std::vector<std::string> open_;
  std::vector<std::string> completed_;
  std::optional<Millis> first_start_;
  std::optional<Millis> last_end_;
  std::optional<Millis> last_t_;
  std::string error_message_;
};

/// Outcome of validating a complete transcript.
struct TranscriptOutcome {
  bool done = false;  // false: driver reported ERR
  std::string error_message;
  Millis window_start{0};
  Millis window_end{0};
  std::optional<std::pair<std::uint64_t, std::uint64_t>> last_net;
};

/// Validates a whole event stream. Truncated streams (no terminal event)
/// and trailing lines after the terminal event are protocol errors.
TranscriptOutcome validate_transcript(std::span<const std::string> lines);

}  // namespace ecotrace
