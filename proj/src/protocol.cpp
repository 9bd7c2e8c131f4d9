#include "ecotrace/protocol.hpp"

#include <charconv>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

[[noreturn]] void protocol_error(std::string_view line, const std::string& why) {
  throw Error(ErrorKind::protocol, "protocol violation: " + why + " in line '" +
                                       std::string(line) + "'",
              std::string(line));
}

/// Splits on single spaces; empty tokens are rejected.
std::vector<std::string_view> split_strict(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto sp = line.find(' ', start);
    const auto tok = line.substr(start, sp == std::string_view::npos ? sp : sp - start);
    if (tok.empty()) protocol_error(line, "empty token");
    out.push_back(tok);
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return out;
}

template <typename T>
T parse_unsigned(std::string_view line, std::string_view tok, const char* what) {
  for (char c : tok) {
    if (c < '0' || c > '9') protocol_error(line, std::string("non-numeric ") + what);
  }
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    protocol_error(line, std::string(what) + " out of range");
  }
  return value;
}

std::string join(std::span<const std::string_view> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

DriverEvent parse_driver_line(std::string_view line) {
  if (line.empty()) protocol_error(line, "empty line");
  for (unsigned char c : line) {
    if (c < 0x20 || c == 0x7f) protocol_error(line, "control character");
  }
  DriverEvent ev;
  if (line.rfind("ERR", 0) == 0) {
    if (line.size() < 5 || line[3] != ' ') protocol_error(line, "ERR without message");
    ev.kind = DriverEventKind::err;
    ev.message = std::string(line.substr(4));
    return ev;
  }
  const auto tokens = split_strict(line);
  const auto& head = tokens.front();
  if (head == "READY") {
    if (tokens.size() != 1) protocol_error(line, "READY takes no arguments");
    ev.kind = DriverEventKind::ready;
  } else if (head == "DONE") {
    if (tokens.size() != 2 || tokens[1] != "0") protocol_error(line, "expected 'DONE 0'");
    ev.kind = DriverEventKind::done;
  } else if (head == "NET") {
    if (tokens.size() != 3) protocol_error(line, "expected NET <bytes_in> <bytes_out>");
    ev.kind = DriverEventKind::net;
    ev.bytes_in = parse_unsigned<std::uint64_t>(line, tokens[1], "bytes_in");
    ev.bytes_out = parse_unsigned<std::uint64_t>(line, tokens[2], "bytes_out");
  } else if (head == "STEP") {
    if (tokens.size() < 4) protocol_error(line, "expected STEP <name> START|END <t_ms>");
    const auto& phase = tokens[tokens.size() - 2];
    if (phase == "START") ev.kind = DriverEventKind::step_start;
    else if (phase == "END") ev.kind = DriverEventKind::step_end;
    else protocol_error(line, "step phase must be START or END");
    ev.t = Millis{parse_unsigned<std::int64_t>(line, tokens.back(), "t_ms")};
    ev.step = join(std::span(tokens).subspan(1, tokens.size() - 3));
  } else {
    protocol_error(line, "unknown event '" + std::string(head) + "'");
  }
  return ev;
}

std::string format_run_command(std::string_view unit, std::string_view config_label) {
  return "RUN " + std::string(unit) + " " + std::string(config_label);
}

std::optional<RunCommand> parse_run_command(std::string_view line) {
  if (line.rfind("RUN ", 0) != 0) return std::nullopt;
  const auto rest = line.substr(4);
  const auto sp = rest.rfind(' ');
  if (sp == std::string_view::npos || sp == 0 || sp + 1 >= rest.size()) return std::nullopt;
  return RunCommand{std::string(rest.substr(0, sp)), std::string(rest.substr(sp + 1))};
}

void ProtocolStateMachine::accept(const DriverEvent& ev, std::string_view raw) {
  if (terminated()) protocol_error(raw, "event after terminal DONE/ERR");
  if (ev.kind == DriverEventKind::err) {
    state_ = State::failed;
    error_message_ = ev.message;
    return;
  }
  if (state_ == State::awaiting_ready) {
    if (ev.kind != DriverEventKind::ready) protocol_error(raw, "expected READY first");
    state_ = State::running;
    return;
  }
  switch (ev.kind) {
    case DriverEventKind::ready:
      protocol_error(raw, "duplicate READY");
    case DriverEventKind::net:
      return;
    case DriverEventKind::step_start:
      if (last_t_ && ev.t < *last_t_) protocol_error(raw, "timestamp goes backwards");
      last_t_ = ev.t;
      if (!first_start_) first_start_ = ev.t;
      open_.push_back(ev.step);
      return;
    case DriverEventKind::step_end:
      if (open_.empty()) protocol_error(raw, "STEP END without matching START");
      if (open_.back() != ev.step) {
        protocol_error(raw, "STEP END for '" + ev.step + "' but open step is '" + open_.back() +
                                "'");
      }
      if (last_t_ && ev.t < *last_t_) protocol_error(raw, "timestamp goes backwards");
      last_t_ = ev.t;
      last_end_ = ev.t;
      completed_.push_back(ev.step);
      open_.pop_back();
      return;
    case DriverEventKind::done:
      if (!open_.empty()) protocol_error(raw, "DONE with open step '" + open_.back() + "'");
      if (completed_.empty()) protocol_error(raw, "DONE before any completed step");
      state_ = State::done;
      return;
    case DriverEventKind::err:
      break;
  }
}

TranscriptOutcome validate_transcript(std::span<const std::string> lines) {
  ProtocolStateMachine machine;
  TranscriptOutcome out;
  for (const auto& line : lines) {
    const auto ev = parse_driver_line(line);
    machine.accept(ev, line);
    if (ev.kind == DriverEventKind::net) out.last_net = {ev.bytes_in, ev.bytes_out};
  }
  if (!machine.terminated()) {
    throw Error(ErrorKind::protocol, "protocol violation: stream ended without DONE or ERR");
  }
  out.done = machine.state() == ProtocolStateMachine::State::done;
  out.error_message = machine.error_message();
  if (out.done) {
    out.window_start = *machine.first_start();
    out.window_end = *machine.last_end();
  }
  return out;
}

}  // namespace ecotrace
