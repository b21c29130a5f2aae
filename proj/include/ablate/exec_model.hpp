#pragma once

// Client side of the external model protocol. The child is launched once and
// spoken to over its stdin/stdout:
//
//   engine -> child   HELLO <M>
//   child  -> engine  READY
//   engine -> child   BATCH <n>, then n lines of M space-separated numbers
//   child  -> engine  n lines, one prediction each
//
// Numbers are shortest round-trip decimals, lines end with a single '\n'.
// A child line starting with "ERR " aborts with that message. At shutdown the
// engine closes the child's stdin and expects exit status 0.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "ablate/core.hpp"
#include "ablate/error.hpp"
#include "ablate/format.hpp"

extern char** environ;

namespace ablate {

struct ExecOptions {
  bool serial = true;
  std::chrono::milliseconds batch_timeout{60'000};
};

class ExecModel final : public Model {
 public:
  ExecModel(std::vector<std::string> command, std::size_t num_features, ExecOptions options = {})
      : command_(std::move(command)), num_features_(num_features), options_(options) {
    if (command_.empty() || command_.front().empty()) {
      throw InvalidArgument("exec model command is empty");
    }
    ignore_sigpipe();
    launch();
    handshake();
  }

  ExecModel(const ExecModel&) = delete;
  ExecModel& operator=(const ExecModel&) = delete;

  ~ExecModel() override {
    try {
      terminate_child(std::chrono::seconds(5));
    } catch (...) {
    }
  }

  bool serial() const noexcept override { return options_.serial; }

  std::vector<double> predict_batch(const Matrix& rows) const override {
    std::lock_guard lock(mutex_);
    if (broken_) throw ModelContractError("external model is unusable after an earlier failure");
    if (rows.cols() != num_features_) {
      throw ModelContractError("external model expects " + std::to_string(num_features_) +
                               " features, got " + std::to_string(rows.cols()));
    }
    try {
      return exchange(rows);
    } catch (...) {
      broken_ = true;
      throw;
    }
  }

  /// Closes the child's stdin and waits for it. Throws if it exits non-zero
  /// or has to be killed.
  void shutdown() {
    std::lock_guard lock(mutex_);
    const int status = terminate_child(std::chrono::seconds(5));
    if (status != 0) {
      throw ModelContractError("external model exited with " + describe_status(status) +
                               stderr_suffix());
    }
  }

  pid_t pid() const noexcept { return pid_; }

 private:
  static void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
  }

  static void close_fd(int& fd) noexcept {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }

  void launch() {
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw_launch_errno("pipe");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw_launch_errno("pipe");
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
      throw_launch_errno("pipe");
    }

    posix_spawn_file_actions_t actions;
    ::posix_spawn_file_actions_init(&actions);
    ::posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    ::posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    ::posix_spawn_file_actions_adddup2(&actions, err_pipe[1], STDERR_FILENO);

    std::vector<char*> argv;
    argv.reserve(command_.size() + 1);
    for (auto& arg : command_) argv.push_back(arg.data());
    argv.push_back(nullptr);

    const int rc = ::posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
    ::posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    in_fd_ = in_pipe[1];
    out_fd_ = out_pipe[0];
    err_fd_ = err_pipe[0];
    if (rc != 0) {
      pid_ = -1;
      close_fd(in_fd_);
      close_fd(out_fd_);
      close_fd(err_fd_);
      throw ModelContractError("failed to launch external model '" + command_.front() +
                               "': " + std::strerror(rc));
    }
    ::fcntl(in_fd_, F_SETFL, ::fcntl(in_fd_, F_GETFL) | O_NONBLOCK);
  }

  [[noreturn]] static void throw_launch_errno(const char* what) {
    throw ModelContractError(std::string("failed to launch external model: ") + what + ": " +
                             std::strerror(errno));
  }

  void handshake() {
    try {
      const std::vector<std::string> lines =
          transact("HELLO " + std::to_string(num_features_) + "\n", 1);
      if (lines.front() != "READY") {
        fail("expected READY after HELLO, got '" + lines.front() + "'");
      }
    } catch (...) {
      broken_ = true;
      terminate_child(std::chrono::milliseconds(200));
      throw;
    }
  }

  std::vector<double> exchange(const Matrix& rows) const {
    std::string payload = "BATCH " + std::to_string(rows.rows()) + "\n";
    for (std::size_t b = 0; b < rows.rows(); ++b) {
      const auto row = rows.row(b);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c > 0) payload += ' ';
        payload += format_double(row[c]);
      }
      payload += '\n';
    }
    const std::vector<std::string> lines = transact(payload, rows.rows());
    std::vector<double> preds(lines.size());
    for (std::size_t b = 0; b < lines.size(); ++b) {
      const auto value = parse_finite_double(lines[b]);
      if (!value) {
        fail("malformed prediction line " + std::to_string(b + 1) + " of " +
             std::to_string(lines.size()) + ": '" + lines[b] + "'");
      }
      preds[b] = *value;
    }
    return preds;
  }

  /// Writes `payload` and collects exactly `expected` reply lines, servicing
  /// stdin, stdout and stderr together so neither side can block the other.
  std::vector<std::string> transact(const std::string& payload, std::size_t expected) const {
    if (!pending_.empty()) fail("unexpected output from external model: '" + first_line(pending_) + "'");
    const auto deadline = std::chrono::steady_clock::now() + options_.batch_timeout;
    std::size_t written = 0;
    std::vector<std::string> lines;
    lines.reserve(expected);

    while (written < payload.size() || lines.size() < expected) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        fail("timed out after " + std::to_string(options_.batch_timeout.count()) +
             " ms waiting for the external model (" + std::to_string(lines.size()) + " of " +
             std::to_string(expected) + " lines received)");
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;

      pollfd fds[3];
      nfds_t count = 0;
      int in_slot = -1, out_slot = -1, err_slot = -1;
      if (written < payload.size()) {
        in_slot = static_cast<int>(count);
        fds[count++] = {in_fd_, POLLOUT, 0};
      }
      out_slot = static_cast<int>(count);
      fds[count++] = {out_fd_, POLLIN, 0};
      if (err_fd_ >= 0) {
        err_slot = static_cast<int>(count);
        fds[count++] = {err_fd_, POLLIN, 0};
      }
      const int ready = ::poll(fds, count, static_cast<int>(remaining));
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;

      if (err_slot >= 0 && fds[err_slot].revents != 0) drain_stderr();

      if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP)) != 0) {
        const ssize_t n = ::write(in_fd_, payload.data() + written, payload.size() - written);
        if (n > 0) {
          written += static_cast<std::size_t>(n);
        } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
          fail(std::string("external model closed its input: ") + std::strerror(errno));
        }
      }

      if ((fds[out_slot].revents & (POLLIN | POLLHUP | POLLERR)) != 0) {
        char buf[65536];
        const ssize_t n = ::read(out_fd_, buf, sizeof(buf));
        if (n < 0) {
          if (errno == EINTR || errno == EAGAIN) continue;
          fail(std::string("reading from external model failed: ") + std::strerror(errno));
        }
        if (n == 0) {
          fail("external model closed its output after " + std::to_string(lines.size()) + " of " +
               std::to_string(expected) + " lines");
        }
        pending_.append(buf, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t nl = pending_.find('\n'); nl != std::string::npos;
             nl = pending_.find('\n', start)) {
          std::string line = pending_.substr(start, nl - start);
          start = nl + 1;
          if (line.rfind("ERR ", 0) == 0) fail("external model reported: " + line.substr(4), false);
          if (lines.size() == expected) {
            fail("external model sent more than " + std::to_string(expected) + " lines");
          }
          lines.push_back(std::move(line));
        }
        pending_.erase(0, start);
      }
    }
    if (!pending_.empty()) {
      fail("unexpected output from external model: '" + first_line(pending_) + "'");
    }
    return lines;
  }

  void drain_stderr() const {
    char buf[4096];
    const ssize_t n = ::read(err_fd_, buf, sizeof(buf));
    if (n <= 0) {
      if (n == 0 || (errno != EINTR && errno != EAGAIN)) close_fd(err_fd_);
      return;
    }
    stderr_tail_.append(buf, static_cast<std::size_t>(n));
    constexpr std::size_t kKeep = 4096;
    if (stderr_tail_.size() > kKeep) stderr_tail_.erase(0, stderr_tail_.size() - kKeep);
  }

  static std::string first_line(const std::string& text) {
    return text.substr(0, std::min(text.find('\n'), std::size_t{200}));
  }

  std::string stderr_suffix() const {
    if (stderr_tail_.empty()) return {};
    std::string tail = stderr_tail_;
    while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r')) tail.pop_back();
    return "; child stderr: " + tail;
  }

  static std::string describe_status(int status) {
    if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return "signal " + std::to_string(WTERMSIG(status));
    return "status " + std::to_string(status);
  }

  /// Throws a ModelContractError carrying whatever diagnostics the child left.
  [[noreturn]] void fail(const std::string& message, bool with_status = true) const {
    std::string full = message;
    if (with_status && pid_ > 0) {
      // Give a crashing child a moment to finish dying so its status and
      // stderr can be reported.
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        full += " (child " + describe_status(status) + ")";
      }
    }
    while (err_fd_ >= 0) {
      pollfd pfd{err_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 0) <= 0) break;
      drain_stderr();
    }
    throw ModelContractError(full + stderr_suffix());
  }

  /// Closes stdin, waits up to `grace` for a clean exit, then kills.
  /// Returns the wait status (0 if there was no child to reap).
  int terminate_child(std::chrono::milliseconds grace) const {
    close_fd(in_fd_);
    int status = 0;
    if (pid_ > 0) {
      const auto deadline = std::chrono::steady_clock::now() + grace;
      bool reaped = false;
      while (std::chrono::steady_clock::now() < deadline) {
        const pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_ || (r < 0 && errno != EINTR)) {
          reaped = true;
          break;
        }
        if (err_fd_ >= 0) {
          pollfd pfd{err_fd_, POLLIN, 0};
          if (::poll(&pfd, 1, 5) > 0) drain_stderr();
        } else {
          std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
      }
      if (!reaped) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
      pid_ = -1;
    }
    close_fd(out_fd_);
    close_fd(err_fd_);
    return status;
  }

  std::vector<std::string> command_;
  std::size_t num_features_;
  ExecOptions options_;

  mutable std::mutex mutex_;
  mutable pid_t pid_ = -1;
  mutable int in_fd_ = -1;
  mutable int out_fd_ = -1;
  mutable int err_fd_ = -1;
  mutable std::string pending_;
  mutable std::string stderr_tail_;
  mutable bool broken_ = false;
};

/// Launches `command` and completes the handshake for an M-feature model.
inline std::unique_ptr<ExecModel> exec_model(std::vector<std::string> command,
                                             std::size_t num_features, bool serial = true,
                                             std::chrono::milliseconds batch_timeout =
                                                 std::chrono::milliseconds(60'000)) {
  return std::make_unique<ExecModel>(std::move(command), num_features,
                                     ExecOptions{serial, batch_timeout});
}

}  // namespace ablate
