#pragma once

// Oracle client speaking the wire protocol with a child process over its
// stdin/stdout. Requests from any thread are multiplexed on one pipe and
// replies are matched back by request id.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <future>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hierxai/oracle.hpp"
#include "hierxai/wire.hpp"

extern char** environ;

namespace hierxai {

namespace detail {
// Blocks SIGPIPE on this thread so a dead child surfaces as EPIPE.
class SigpipeGuard {
 public:
  SigpipeGuard() {
    sigemptyset(&pipe_);
    sigaddset(&pipe_, SIGPIPE);
    sigset_t pending;
    sigpending(&pending);
    was_pending_ = sigismember(&pending, SIGPIPE) == 1;
    pthread_sigmask(SIG_BLOCK, &pipe_, &old_);
  }
  ~SigpipeGuard() {
    if (!was_pending_) {
      sigset_t pending;
      sigpending(&pending);
      if (sigismember(&pending, SIGPIPE) == 1) {
        const timespec zero{0, 0};
        while (sigtimedwait(&pipe_, nullptr, &zero) == -1 && errno == EINTR) {
        }
      }
    }
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }
  SigpipeGuard(const SigpipeGuard&) = delete;
  SigpipeGuard& operator=(const SigpipeGuard&) = delete;

 private:
  sigset_t pipe_{}, old_{};
  bool was_pending_ = false;
};
}  // namespace detail

class SubprocessOracle final : public Oracle {
 public:
  explicit SubprocessOracle(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(60))
      : command_(std::move(command)), timeout_(timeout) {
    spawn();
    reader_ = std::thread([this] { read_loop(); });
    try {
      info_ = handshake();
    } catch (...) {
      shutdown();
      throw;
    }
  }

  SubprocessOracle(const SubprocessOracle&) = delete;
  SubprocessOracle& operator=(const SubprocessOracle&) = delete;

  ~SubprocessOracle() override { shutdown(); }

  OracleInfo hello() override { return info_; }

  std::vector<LogitVector> logits(std::span<const Image> batch) override {
    if (batch.empty()) return {};
    check_batch_shape(info_, batch);
    const std::uint64_t id = next_id_++;
    wire::Response r = call(id, wire::encode(wire::make_logits_request(id, batch)));
    if (!r.logits) throw OracleError("oracle reply to request " + std::to_string(id) + " carries no logits");
    check_logits(info_, *r.logits, batch.size());
    return std::move(*r.logits);
  }

  std::string identity() const override { return "cmd:" + command_; }

 private:
  void spawn() {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw OracleError("pipe() failed: " + std::string(std::strerror(errno)));
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
    const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
    const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
      close(in_pipe[1]);
      close(out_pipe[0]);
      throw OracleError("cannot start oracle command: " + std::string(std::strerror(rc)));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  }

  OracleInfo handshake() {
    const std::uint64_t id = next_id_++;
    wire::Response r = call(id, wire::encode(wire::HelloRequest{id}));
    if (!r.info) throw OracleError("malformed hello reply");
    OracleInfo info = *r.info;
    if (info.n_classes < 2) throw OracleError("oracle reports fewer than two classes");
    info.name = command_;
    return info;
  }

  wire::Response call(std::uint64_t id, const std::string& line) {
    std::future<wire::Response> fut;
    {
      std::lock_guard lock(mu_);
      if (dead_) throw OracleError("oracle process is not running: " + dead_reason_);
      fut = pending_[id].get_future();
    }
    {
      std::lock_guard lock(write_mu_);
      const detail::SigpipeGuard guard;
      std::string buf = line + "\n";
      const char* p = buf.data();
      std::size_t left = buf.size();
      while (left > 0) {
        const ssize_t w = ::write(to_child_, p, left);
        if (w < 0) {
          if (errno == EINTR) continue;
          fail_all("write to oracle failed: " + std::string(std::strerror(errno)));
          break;
        }
        p += w;
        left -= static_cast<std::size_t>(w);
      }
    }
    if (fut.wait_for(timeout_) != std::future_status::ready) {
      std::lock_guard lock(mu_);
      pending_.erase(id);
      throw OracleError("oracle request " + std::to_string(id) + " timed out");
    }
    wire::Response r = fut.get();
    if (!r.ok) throw OracleError("oracle error (request " + std::to_string(id) + "): " + r.error);
    return r;
  }

  void read_loop() {
    std::string buf;
    char chunk[65536];
    for (;;) {
      const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        const std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty()) deliver(line);
      }
    }
    fail_all("oracle process closed its output");
  }

  void deliver(const std::string& line) {
    wire::Response r;
    try {
      r = wire::decode_response(line);
    } catch (const std::exception& e) {
      fail_all(std::string("protocol error: ") + e.what());
      return;
    }
    std::lock_guard lock(mu_);
    auto it = pending_.find(r.id);
    if (it == pending_.end()) return;  // late reply to a timed-out request
    it->second.set_value(std::move(r));
    pending_.erase(it);
  }

  void fail_all(const std::string& why) {
    std::lock_guard lock(mu_);
    dead_ = true;
    dead_reason_ = why;
    for (auto& [id, p] : pending_) {
      wire::Response r;
      r.id = id;
      r.ok = false;
      r.error = why;
      p.set_value(std::move(r));
    }
    pending_.clear();
  }

  void shutdown() {
    if (to_child_ >= 0) {
      close(to_child_);
      to_child_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
      while (waitpid(pid_, &status, WNOHANG) == 0) {
        if (std::chrono::steady_clock::now() > deadline) {
          kill(pid_, SIGKILL);
          waitpid(pid_, &status, 0);
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      pid_ = -1;
    }
    if (reader_.joinable()) reader_.join();
    if (from_child_ >= 0) {
      close(from_child_);
      from_child_ = -1;
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::thread reader_;
  std::atomic<std::uint64_t> next_id_{1};
  std::mutex mu_;
  std::mutex write_mu_;
  std::map<std::uint64_t, std::promise<wire::Response>> pending_;
  bool dead_ = false;
  std::string dead_reason_;
  OracleInfo info_;
};

}  // namespace hierxai
