#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "cgp/errors.hpp"
#include "cgp/objectives.hpp"

namespace cgp {
namespace {

struct CommandOutcome {
  std::string stdout_text;
  int exit_status = 0;
  bool timed_out = false;
};

CommandOutcome run_shell(const std::string& command, std::chrono::milliseconds timeout) {
  int fds[2];
  if (pipe(fds) != 0) throw EvaluationError(std::string("pipe failed: ") + std::strerror(errno));
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw EvaluationError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(fds[1]);

  CommandOutcome out;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      out.timed_out = true;
      break;
    }
    pollfd p{fds[0], POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) {
      out.timed_out = true;
      break;
    }
    const ssize_t got = read(fds[0], buf, sizeof buf);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) break;
    out.stdout_text.append(buf, static_cast<std::size_t>(got));
  }
  close(fds[0]);
  if (out.timed_out) kill(-pid, SIGKILL);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status))
    out.exit_status = WEXITSTATUS(status);
  else
    out.exit_status = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  return out;
}

}  // namespace

Objective external_command(std::string command_template, SearchSpace space, Direction direction,
                           std::chrono::milliseconds timeout) {
  for (std::size_t i = 0; i < space.dim(); ++i)
    if (command_template.find("{x" + std::to_string(i) + "}") == std::string::npos)
      throw ConfigError("command template lacks placeholder {x" + std::to_string(i) + "}");
  return {"command", std::move(space), direction,
          [tmpl = std::move(command_template), timeout](std::span<const double> x) {
            const std::string cmd = render_command(tmpl, x);
            const CommandOutcome r = run_shell(cmd, timeout);
            if (r.timed_out)
              throw EvaluationError("command timed out: " + cmd, r.stdout_text);
            if (r.exit_status != 0)
              throw EvaluationError(
                  "command exited with status " + std::to_string(r.exit_status) + ": " + cmd,
                  r.stdout_text);
            return parse_last_line(r.stdout_text);
          },
          std::nullopt};
}

}  // namespace cgp
