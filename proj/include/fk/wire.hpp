// SPDX-License-Identifier: Apache-2.0
//
// Worker wire protocol: fk-records/1 lines over standard streams. Message
// types: work_request / work_response for Tier-1/2 kernels, rank_request /
// rank_send / rank_recv / rank_response for the simulated collective,
// worker_error and shutdown.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fk/core.hpp"

namespace fk {

struct WorkRequest {
    std::string scenario_id;
    std::vector<OutputPayload> inputs;
    int warmup_iters = 10;
    int timed_runs = 3;
    std::map<std::string, std::string> bindings;  // slot -> locator
    bool capture = false;
};

struct SlotCapture {
    std::string slot;
    std::vector<OutputPayload> inputs;  // one invocation
};

struct WorkResponse {
    std::string scenario_id;
    OutputPayload output;
    std::vector<double> run_times_s;  // raw per-run wall times
    double units = 0.0;               // work per run, for throughput
    std::vector<SlotCapture> captures;  // in invocation order, when requested
};

struct RankHello {
    std::string scenario_id;
    std::vector<OutputPayload> inputs;  // the rank's local input(s)
};

struct RankMessage {
    int to = 0;
    int from = 0;
    int origin = 0;  // rank whose data this payload carries
    OutputPayload payload;
};

struct WorkerErrorMsg {
    std::string code;  // errc name
    std::string message;
};

std::string encode_work_request(const WorkRequest& r);
std::string encode_work_response(const WorkResponse& r);
std::string encode_rank_request(const RankHello& r);
std::string encode_rank_send(const RankMessage& m);
std::string encode_rank_recv(const RankMessage& m);
std::string encode_rank_response(const std::string& scenario_id, const OutputPayload& out);
std::string encode_worker_error(const WorkerErrorMsg& e);
std::string encode_shutdown();

// Variant-ish decoded message.
struct WireMessage {
    std::string type;
    WorkRequest work_request;
    WorkResponse work_response;
    RankHello rank_request;
    RankMessage rank_message;  // for rank_send / rank_recv
    std::string scenario_id;   // for rank_response
    OutputPayload rank_output;
    WorkerErrorMsg error;
};

WireMessage decode_wire(const std::string& line);

}  // namespace fk
