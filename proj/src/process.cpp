#include "ecotrace/process.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

[[noreturn]] void sys_error(const std::string& what) {
  throw Error(ErrorKind::run, what + ": " + std::strerror(errno));
}

}  // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& argv,
                           const std::filesystem::path& cwd) {
  if (argv.empty()) throw Error(ErrorKind::validation, "empty driver command", "driver_command");
  // Writes to a driver that already exited must surface as errors, not kill us.
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  int exec_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) sys_error("pipe");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) sys_error("pipe");
  if (::pipe2(exec_pipe, O_CLOEXEC) != 0) sys_error("pipe");

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const std::string dir = cwd.string();

  pid_ = ::fork();
  if (pid_ < 0) sys_error("fork");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    if (!dir.empty() && ::chdir(dir.c_str()) != 0) {
      const int err = errno;
      (void)!::write(exec_pipe[1], &err, sizeof err);
      ::_exit(127);
    }
    ::execvp(args[0], args.data());
    const int err = errno;
    (void)!::write(exec_pipe[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(exec_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  int child_errno = 0;
  const auto n = ::read(exec_pipe[0], &child_errno, sizeof child_errno);
  ::close(exec_pipe[0]);
  if (n == sizeof child_errno) {
    ::waitpid(pid_, nullptr, 0);
    reaped_ = true;
    close_fd(to_child_);
    close_fd(from_child_);
    throw Error(ErrorKind::io,
                "cannot launch driver '" + argv.front() + "': " + std::strerror(child_errno),
                argv.front());
  }
}

ChildProcess::~ChildProcess() {
  kill();
  close_fd(to_child_);
  close_fd(from_child_);
}

void ChildProcess::write_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::run, std::string("cannot write to driver: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

ChildProcess::ReadStatus ChildProcess::read_line(
    std::string& out, std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return ReadStatus::line;
    }
    if (eof_) {
      if (buffer_.empty()) return ReadStatus::eof;
      out = std::move(buffer_);
      buffer_.clear();
      return ReadStatus::line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) return ReadStatus::timeout;
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      sys_error("poll");
    }
    if (rc == 0) continue;
    char chunk[4096];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_error("read");
    }
    if (n == 0) eof_ = true;
    else buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::optional<int> ChildProcess::finish(std::chrono::milliseconds grace) {
  if (reaped_) return std::nullopt;
  close_fd(to_child_);
  const auto deadline = std::chrono::steady_clock::now() + grace;
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      if (WIFEXITED(status)) return WEXITSTATUS(status);
      return std::nullopt;
    }
    if (r < 0 && errno != EINTR) {
      reaped_ = true;
      return std::nullopt;
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  kill();
  return std::nullopt;
}

void ChildProcess::kill() {
  if (reaped_ || pid_ <= 0) return;
  ::kill(pid_, SIGKILL);
  while (::waitpid(pid_, nullptr, 0) < 0 && errno == EINTR) {
  }
  reaped_ = true;
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  bool have = false;
  for (char c : command) {
    if (c == '"') {
      in_quotes = !in_quotes;
      have = true;
    } else if (!in_quotes && (c == ' ' || c == '\t')) {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur += c;
      have = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::validation, "unbalanced quote in driver_command",
                             "driver_command");
  if (have) out.push_back(std::move(cur));
  return out;
}

}  // namespace ecotrace
