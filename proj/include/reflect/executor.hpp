#pragma once

#include <string>
#include <vector>

namespace reflect {

enum class ExecStatus { pass, fail, timeout, error };
const char* to_string(ExecStatus s);

struct ExecResult {
  ExecStatus status = ExecStatus::error;
  int exit_code = -1;
  std::string output;
};

class CodeExecutor {
 public:
  virtual ~CodeExecutor() = default;
  virtual ExecResult run(const std::string& program) = 0;
};

// Runs a configurable command, feeding the program (code plus assertion) on
// standard input. Exit code 0 means pass, 124 timeout, anything else fail; a
// wall-clock deadline enforced here also maps to timeout.
class CommandExecutor : public CodeExecutor {
 public:
  explicit CommandExecutor(std::string command = "python3 -", int timeout_ms = 10000)
      : command_(std::move(command)), timeout_ms_(timeout_ms) {}
  ExecResult run(const std::string& program) override;

 private:
  std::string command_;
  int timeout_ms_;
};

// Test double: ordered substring rules deciding pass/fail/timeout.
class FakeExecutor : public CodeExecutor {
 public:
  struct Rule {
    std::string match;  // substring of the program; empty matches everything
    ExecStatus status = ExecStatus::pass;
  };
  explicit FakeExecutor(std::vector<Rule> rules, ExecStatus fallback = ExecStatus::fail)
      : rules_(std::move(rules)), fallback_(fallback) {}
  ExecResult run(const std::string& program) override;

 private:
  std::vector<Rule> rules_;
  ExecStatus fallback_;
};

}  // namespace reflect
