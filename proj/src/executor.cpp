#include "reflect/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>

namespace reflect {

const char* to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::pass:
      return "pass";
    case ExecStatus::fail:
      return "fail";
    case ExecStatus::timeout:
      return "timeout";
    case ExecStatus::error:
      return "error";
  }
  return "?";
}

ExecResult CommandExecutor::run(const std::string& program) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw std::runtime_error("executor: pipe() failed");

  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("executor: fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  close(in_pipe[0]);
  close(out_pipe[1]);

  // feed the program; the child may exit early, so ignore EPIPE
  signal(SIGPIPE, SIG_IGN);
  std::size_t written = 0;
  while (written < program.size()) {
    ssize_t n = write(in_pipe[1], program.data() + written, program.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  close(in_pipe[1]);

  ExecResult result;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  bool timed_out = false;
  char buf[4096];
  while (true) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                         deadline - std::chrono::steady_clock::now())
                         .count();
    if (remaining <= 0) {
      timed_out = true;
      break;
    }
    struct pollfd pfd { out_pipe[0], POLLIN, 0 };
    int rc = poll(&pfd, 1, static_cast<int>(remaining));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) {
      timed_out = true;
      break;
    }
    ssize_t n = read(out_pipe[0], buf, sizeof(buf));
    if (n <= 0) break;  // eof
    if (result.output.size() < 65536)
      result.output.append(buf, static_cast<std::size_t>(n));
  }
  close(out_pipe[0]);

  if (timed_out) {
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    result.status = ExecStatus::timeout;
    result.exit_code = 124;
    return result;
  }

  int status = 0;
  if (waitpid(pid, &status, 0) < 0) {
    result.status = ExecStatus::error;
    return result;
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
    if (result.exit_code == 0)
      result.status = ExecStatus::pass;
    else if (result.exit_code == 124)
      result.status = ExecStatus::timeout;
    else
      result.status = ExecStatus::fail;
  } else {
    result.status = ExecStatus::error;
  }
  return result;
}

ExecResult FakeExecutor::run(const std::string& program) {
  for (const auto& rule : rules_) {
    if (rule.match.empty() || program.find(rule.match) != std::string::npos) {
      ExecResult r;
      r.status = rule.status;
      r.exit_code = rule.status == ExecStatus::pass      ? 0
                    : rule.status == ExecStatus::timeout ? 124
                                                         : 1;
      return r;
    }
  }
  ExecResult r;
  r.status = fallback_;
  r.exit_code = fallback_ == ExecStatus::pass ? 0 : 1;
  return r;
}

}  // namespace reflect
