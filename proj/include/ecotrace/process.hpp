#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace ecotrace {

/// Child process with piped stdin/stdout; stderr is inherited. The
/// destructor kills and reaps a child that is still running.
class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& argv, const std::filesystem::path& cwd = {});
  ~ChildProcess();

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void write_line(std::string_view line);

  enum class ReadStatus { line, eof, timeout };
  /// Reads one line (without the trailing newline or CR) before `deadline`.
  ReadStatus read_line(std::string& out, std::chrono::steady_clock::time_point deadline);

  /// Waits up to `grace` for exit, then SIGKILLs. Returns the exit status
  /// when the child exited normally.
  std::optional<int> finish(std::chrono::milliseconds grace);
  void kill();

  pid_t pid() const noexcept { return pid_; }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool reaped_ = false;
  std::string buffer_;
  bool eof_ = false;
};

/// Splits a command string on whitespace; double quotes group words.
std::vector<std::string> split_command(std::string_view command);

}  // namespace ecotrace
