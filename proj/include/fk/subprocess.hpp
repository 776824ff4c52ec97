// SPDX-License-Identifier: Apache-2.0
//
// Worker process management: spawn, line-oriented stdin/stdout exchange with
// deadlines, and hard kill. The orchestrator never shares a process with
// candidate code.
#pragma once

#include <sys/types.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fk {

enum class ReadStatus { Line, Timeout, Eof };

class WorkerProcess {
  public:
    struct Options {
        std::vector<std::string> argv;                 // argv[0] = executable path
        std::map<std::string, std::string> env_extra;  // appended to the environment
    };

    WorkerProcess() = default;
    static WorkerProcess spawn(const Options& opts);  // throws rank_spawn_failure

    WorkerProcess(WorkerProcess&&) noexcept;
    WorkerProcess& operator=(WorkerProcess&&) noexcept;
    WorkerProcess(const WorkerProcess&) = delete;
    WorkerProcess& operator=(const WorkerProcess&) = delete;
    ~WorkerProcess();  // kills and reaps if still running

    // Writes line + '\n'; false when the worker is gone (EPIPE).
    bool write_line(const std::string& line);

    // Reads the next line, waiting up to timeout_s.
    ReadStatus read_line(std::string& out, double timeout_s);

    // Nonblocking variant used by the rank router: drains whatever is
    // available and returns a buffered line if one is complete.
    ReadStatus poll_line(std::string& out);

    void kill_now();
    // Reaps the child; returns true when it exited with status 0.
    bool wait_clean_exit(double timeout_s);
    // Waits for the child to die on its own; returns the terminating signal
    // (0 for a plain exit), or nothing if it had to be killed.
    std::optional<int> exit_signal(double timeout_s);

    bool running() const { return pid_ > 0; }
    pid_t pid() const { return pid_; }
    int read_fd() const { return out_fd_; }

  private:
    bool take_buffered(std::string& out);

    pid_t pid_ = -1;
    int in_fd_ = -1;   // worker stdin (we write)
    int out_fd_ = -1;  // worker stdout (we read)
    std::string buf_;
    bool eof_ = false;
};

// Blocks until at least one of the workers has readable stdout or the
// deadline passes; returns indices of readable workers (empty on timeout).
std::vector<std::size_t> poll_workers(const std::vector<WorkerProcess*>& workers,
                                      double timeout_s);

// Path of the fk-worker binary: $FK_WORKER_PATH if set, else a sibling of
// the current executable.
std::string worker_binary_path();

}  // namespace fk
