// SPDX-License-Identifier: Apache-2.0
#include "fk/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>

#include "fk/error.hpp"

extern char** environ;

namespace fk {

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void ignore_sigpipe_once() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

}  // namespace

WorkerProcess WorkerProcess::spawn(const Options& opts) {
    require(!opts.argv.empty(), Errc::rank_spawn_failure, "empty argv");
    ignore_sigpipe_once();

    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        fail(Errc::rank_spawn_failure, std::string("pipe: ") + std::strerror(errno));

    pid_t pid = ::fork();
    if (pid < 0) fail(Errc::rank_spawn_failure, std::string("fork: ") + std::strerror(errno));

    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);

        std::vector<std::string> env_store;
        for (char** e = environ; *e; ++e) env_store.emplace_back(*e);
        for (const auto& [k, v] : opts.env_extra) env_store.push_back(k + "=" + v);
        std::vector<char*> envp;
        for (auto& s : env_store) envp.push_back(s.data());
        envp.push_back(nullptr);

        std::vector<std::string> arg_store = opts.argv;
        std::vector<char*> argv;
        for (auto& s : arg_store) argv.push_back(s.data());
        argv.push_back(nullptr);

        ::execve(argv[0], argv.data(), envp.data());
        // Exec failed; nothing sensible to do in the child.
        ::_exit(127);
    }

    ::close(to_child[0]);
    ::close(from_child[1]);

    WorkerProcess w;
    w.pid_ = pid;
    w.in_fd_ = to_child[1];
    w.out_fd_ = from_child[0];
    return w;
}

WorkerProcess::WorkerProcess(WorkerProcess&& o) noexcept { *this = std::move(o); }

WorkerProcess& WorkerProcess::operator=(WorkerProcess&& o) noexcept {
    if (this != &o) {
        kill_now();
        pid_ = o.pid_;
        in_fd_ = o.in_fd_;
        out_fd_ = o.out_fd_;
        buf_ = std::move(o.buf_);
        eof_ = o.eof_;
        o.pid_ = -1;
        o.in_fd_ = o.out_fd_ = -1;
    }
    return *this;
}

WorkerProcess::~WorkerProcess() { kill_now(); }

bool WorkerProcess::write_line(const std::string& line) {
    if (in_fd_ < 0) return false;
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(in_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

bool WorkerProcess::take_buffered(std::string& out) {
    auto pos = buf_.find('\n');
    if (pos == std::string::npos) return false;
    out = buf_.substr(0, pos);
    buf_.erase(0, pos + 1);
    return true;
}

ReadStatus WorkerProcess::read_line(std::string& out, double timeout_s) {
    if (take_buffered(out)) return ReadStatus::Line;
    if (out_fd_ < 0 || eof_) return ReadStatus::Eof;

    double deadline = now_s() + timeout_s;
    char chunk[4096];
    for (;;) {
        double remain = deadline - now_s();
        if (remain < 0.0) return ReadStatus::Timeout;
        struct pollfd pfd{out_fd_, POLLIN, 0};
        int pr = ::poll(&pfd, 1, static_cast<int>(remain * 1000.0) + 1);
        if (pr < 0) {
            if (errno == EINTR) continue;
            return ReadStatus::Eof;
        }
        if (pr == 0) return ReadStatus::Timeout;
        ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            return ReadStatus::Eof;
        }
        if (n == 0) {
            eof_ = true;
            return take_buffered(out) ? ReadStatus::Line : ReadStatus::Eof;
        }
        buf_.append(chunk, static_cast<std::size_t>(n));
        if (take_buffered(out)) return ReadStatus::Line;
    }
}

ReadStatus WorkerProcess::poll_line(std::string& out) {
    if (take_buffered(out)) return ReadStatus::Line;
    if (out_fd_ < 0 || eof_) return ReadStatus::Eof;
    char chunk[4096];
    for (;;) {
        struct pollfd pfd{out_fd_, POLLIN, 0};
        int pr = ::poll(&pfd, 1, 0);
        if (pr < 0 && errno == EINTR) continue;
        if (pr <= 0) return ReadStatus::Timeout;  // nothing available right now
        ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            return ReadStatus::Eof;
        }
        if (n == 0) {
            eof_ = true;
            return take_buffered(out) ? ReadStatus::Line : ReadStatus::Eof;
        }
        buf_.append(chunk, static_cast<std::size_t>(n));
        if (take_buffered(out)) return ReadStatus::Line;
    }
}

void WorkerProcess::kill_now() {
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
}

bool WorkerProcess::wait_clean_exit(double timeout_s) {
    if (pid_ <= 0) return false;
    double deadline = now_s() + timeout_s;
    for (;;) {
        int status = 0;
        pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
            pid_ = -1;
            if (in_fd_ >= 0) ::close(in_fd_);
            if (out_fd_ >= 0) ::close(out_fd_);
            in_fd_ = out_fd_ = -1;
            return WIFEXITED(status) && WEXITSTATUS(status) == 0;
        }
        if (now_s() > deadline) {
            kill_now();
            return false;
        }
        ::usleep(2000);
    }
}

std::optional<int> WorkerProcess::exit_signal(double timeout_s) {
    if (pid_ <= 0) return std::nullopt;
    double deadline = now_s() + timeout_s;
    for (;;) {
        int status = 0;
        pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
            pid_ = -1;
            if (in_fd_ >= 0) ::close(in_fd_);
            if (out_fd_ >= 0) ::close(out_fd_);
            in_fd_ = out_fd_ = -1;
            return WIFSIGNALED(status) ? WTERMSIG(status) : 0;
        }
        if (now_s() > deadline) {
            kill_now();
            return std::nullopt;
        }
        ::usleep(2000);
    }
}

std::vector<std::size_t> poll_workers(const std::vector<WorkerProcess*>& workers,
                                      double timeout_s) {
    std::vector<struct pollfd> fds;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        if (workers[i]->read_fd() < 0) continue;
        fds.push_back({workers[i]->read_fd(), POLLIN, 0});
        index.push_back(i);
    }
    std::vector<std::size_t> ready;
    if (fds.empty()) return ready;
    int pr = ::poll(fds.data(), fds.size(), static_cast<int>(timeout_s * 1000.0) + 1);
    if (pr <= 0) return ready;
    for (std::size_t i = 0; i < fds.size(); ++i)
        if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) ready.push_back(index[i]);
    return ready;
}

std::string worker_binary_path() {
    if (const char* env = ::getenv("FK_WORKER_PATH"); env && *env) return env;
    char buf[4096];
    ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    require(n > 0, Errc::rank_spawn_failure, "cannot resolve /proc/self/exe");
    buf[n] = '\0';
    std::filesystem::path self(buf);
    std::filesystem::path sibling = self.parent_path() / "fk-worker";
    require(std::filesystem::exists(sibling), Errc::rank_spawn_failure,
            "fk-worker not found next to " + self.string() +
                " (set FK_WORKER_PATH to override)");
    return sibling.string();
}

}  // namespace fk
