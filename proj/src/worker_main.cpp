// SPDX-License-Identifier: Apache-2.0
//
// fk-worker: runs one kernel locator as a subprocess, speaking fk-records/1
// over stdin/stdout. Role comes from FK_WORKER_ROLE (reference, candidate,
// rank-N); collective workers additionally read FK_WORLD_SIZE.
#include <signal.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fk/error.hpp"
#include "fk/kernels.hpp"
#include "fk/wire.hpp"

namespace {

using namespace fk;

void emit(const std::string& line) {
    std::cout << line << "\n";
    std::cout.flush();
}

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct FaultSpec {
    std::optional<int> crash_ordinal;     // request index that aborts
    std::optional<int> segv_ordinal;      // request index that raises SIGSEGV
    std::optional<double> hang_seconds;   // sleep before answering
    std::string inner;                    // spec with process faults peeled
};

bool numeric_tail(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.')) return false;
    return true;
}

// Strips a trailing ":<number>" argument, if present.
std::pair<std::string, std::optional<double>> split_numeric_arg(const std::string& rest) {
    auto colon = rest.rfind(':');
    if (colon != std::string::npos && numeric_tail(rest.substr(colon + 1)))
        return {rest.substr(0, colon), std::stod(rest.substr(colon + 1))};
    return {rest, std::nullopt};
}

FaultSpec peel_process_faults(const std::string& spec) {
    FaultSpec f;
    f.inner = spec;
    for (;;) {
        if (f.inner.rfind("crash:", 0) == 0) {
            auto [rest, arg] = split_numeric_arg(f.inner.substr(6));
            f.crash_ordinal = static_cast<int>(arg.value_or(0.0));
            f.inner = rest;
        } else if (f.inner.rfind("segv:", 0) == 0) {
            auto [rest, arg] = split_numeric_arg(f.inner.substr(5));
            f.segv_ordinal = static_cast<int>(arg.value_or(0.0));
            f.inner = rest;
        } else if (f.inner.rfind("hang:", 0) == 0) {
            auto [rest, arg] = split_numeric_arg(f.inner.substr(5));
            f.hang_seconds = arg.value_or(3600.0);
            f.inner = rest;
        } else {
            return f;
        }
    }
}

int run_kernel_loop(const std::string& spec) {
    FaultSpec fault = peel_process_faults(spec);
    int ordinal = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        WireMessage msg;
        try {
            msg = decode_wire(line);
        } catch (const Error& e) {
            emit(encode_worker_error({errc_name(e.code()), e.what()}));
            continue;
        }
        if (msg.type == "shutdown") return 0;
        if (msg.type != "work_request") {
            emit(encode_worker_error({"parse-error", "expected work_request"}));
            continue;
        }
        const WorkRequest& req = msg.work_request;

        if (fault.crash_ordinal && ordinal == *fault.crash_ordinal) std::abort();
        if (fault.segv_ordinal && ordinal == *fault.segv_ordinal) ::raise(SIGSEGV);
        if (fault.hang_seconds) ::usleep(static_cast<useconds_t>(*fault.hang_seconds * 1e6));
        ++ordinal;

        try {
            KernelContext ctx;
            ctx.bindings = req.bindings;
            WorkResponse resp;
            resp.scenario_id = req.scenario_id;

            if (req.capture) {
                ctx.capture = [&resp](const std::string& slot,
                                      const std::vector<OutputPayload>& inputs) {
                    resp.captures.push_back({slot, inputs});
                };
            }
            resp.output = eval_builtin(fault.inner, req.inputs, ctx);
            ctx.capture = nullptr;

            for (int i = 0; i < req.warmup_iters; ++i) eval_builtin(fault.inner, req.inputs, ctx);
            for (int i = 0; i < std::max(1, req.timed_runs); ++i) {
                double t0 = now_s();
                eval_builtin(fault.inner, req.inputs, ctx);
                double dt = now_s() - t0;
                resp.run_times_s.push_back(std::max(dt, 1e-9));
            }
            resp.units = static_cast<double>(resp.output.element_count());
            emit(encode_work_response(resp));
        } catch (const Error& e) {
            emit(encode_worker_error({errc_name(e.code()), e.what()}));
        } catch (const std::exception& e) {
            emit(encode_worker_error({"invalid-value", e.what()}));
        }
    }
    return 0;
}

OutputPayload ordered_sum(std::vector<std::optional<OutputPayload>>& by_origin) {
    OutputPayload acc = *by_origin[0];
    for (std::size_t r = 1; r < by_origin.size(); ++r) {
        const OutputPayload& v = *by_origin[r];
        for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += v.values[i];
    }
    return acc;
}

int run_rank_loop(const std::string& spec, int rank, int world) {
    bool identity = spec == "allreduce_identity";
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        WireMessage msg = decode_wire(line);
        if (msg.type == "shutdown") return 0;
        if (msg.type != "rank_request") {
            emit(encode_worker_error({"parse-error", "expected rank_request"}));
            continue;
        }
        const RankHello& req = msg.rank_request;
        if (req.inputs.size() != 1) {
            emit(encode_worker_error({"invalid-value", "rank expects one local vector"}));
            continue;
        }
        const OutputPayload& local = req.inputs[0];

        if (identity) {
            emit(encode_rank_response(req.scenario_id, local));
            continue;
        }

        // Ring allgather: pass the held vector to the next rank world-1
        // times, then reduce in origin order so every rank sums identically.
        std::vector<std::optional<OutputPayload>> by_origin(
            static_cast<std::size_t>(world));
        by_origin[static_cast<std::size_t>(rank)] = local;
        OutputPayload held = local;
        int held_origin = rank;
        for (int step = 1; step < world; ++step) {
            RankMessage out;
            out.to = (rank + 1) % world;
            out.from = rank;
            out.origin = held_origin;
            out.payload = held;
            emit(encode_rank_send(out));

            std::string reply;
            if (!std::getline(std::cin, reply)) return 1;
            WireMessage in = decode_wire(reply);
            if (in.type == "shutdown") return 0;
            if (in.type != "rank_recv") {
                emit(encode_worker_error({"parse-error", "expected rank_recv"}));
                return 1;
            }
            held = in.rank_message.payload;
            held_origin = in.rank_message.origin;
            by_origin[static_cast<std::size_t>(held_origin)] = held;
        }
        emit(encode_rank_response(req.scenario_id, ordered_sum(by_origin)));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    if (argc < 2) {
        std::cerr << "usage: fk-worker <locator>\n";
        return 2;
    }
    std::string locator = argv[1];
    std::string spec;
    if (!fk::parse_builtin_locator(locator, spec)) spec = locator;

    const char* role = std::getenv("FK_WORKER_ROLE");
    if (role && std::string(role).rfind("rank-", 0) == 0) {
        int rank = std::atoi(role + 5);
        const char* ws = std::getenv("FK_WORLD_SIZE");
        int world = ws ? std::atoi(ws) : 0;
        if (world < 2 || rank < 0 || rank >= world) {
            std::cerr << "bad rank/world configuration\n";
            return 2;
        }
        try {
            return run_rank_loop(spec, rank, world);
        } catch (const std::exception& e) {
            emit(fk::encode_worker_error({"invalid-value", e.what()}));
            return 1;
        }
    }
    return run_kernel_loop(spec);
}
