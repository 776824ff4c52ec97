// SPDX-License-Identifier: Apache-2.0
#include "fk/wire.hpp"

#include "fk/records.hpp"

namespace fk {

using nlohmann::json;

namespace {

json payloads_to_json(const std::vector<OutputPayload>& ps) {
    json a = json::array();
    for (const auto& p : ps) a.push_back(to_json(p));
    return a;
}

std::vector<OutputPayload> payloads_from_json(const json& j) {
    std::vector<OutputPayload> out;
    for (const auto& e : j) out.push_back(payload_from_json(e));
    return out;
}

}  // namespace

std::string encode_work_request(const WorkRequest& r) {
    json j = {{"scenario_id", r.scenario_id},
              {"inputs", payloads_to_json(r.inputs)},
              {"warmup_iters", r.warmup_iters},
              {"timed_runs", r.timed_runs},
              {"bindings", r.bindings},
              {"capture", r.capture}};
    return record_line("work_request", std::move(j));
}

std::string encode_work_response(const WorkResponse& r) {
    json caps = json::array();
    for (const auto& c : r.captures)
        caps.push_back({{"slot", c.slot}, {"inputs", payloads_to_json(c.inputs)}});
    json j = {{"scenario_id", r.scenario_id},
              {"output", to_json(r.output)},
              {"run_times_s", r.run_times_s},
              {"units", r.units},
              {"captures", std::move(caps)}};
    return record_line("work_response", std::move(j));
}

std::string encode_rank_request(const RankHello& r) {
    return record_line("rank_request",
                       {{"scenario_id", r.scenario_id}, {"inputs", payloads_to_json(r.inputs)}});
}

std::string encode_rank_send(const RankMessage& m) {
    return record_line("rank_send", {{"to", m.to},
                                     {"from", m.from},
                                     {"origin", m.origin},
                                     {"payload", to_json(m.payload)}});
}

std::string encode_rank_recv(const RankMessage& m) {
    return record_line("rank_recv", {{"to", m.to},
                                     {"from", m.from},
                                     {"origin", m.origin},
                                     {"payload", to_json(m.payload)}});
}

std::string encode_rank_response(const std::string& scenario_id, const OutputPayload& out) {
    return record_line("rank_response", {{"scenario_id", scenario_id}, {"output", to_json(out)}});
}

std::string encode_worker_error(const WorkerErrorMsg& e) {
    return record_line("worker_error", {{"code", e.code}, {"message", e.message}});
}

std::string encode_shutdown() { return record_line("shutdown", json::object()); }

WireMessage decode_wire(const std::string& line) {
    auto [type, j] = parse_record_line(line);
    WireMessage m;
    m.type = type;
    if (type == "work_request") {
        m.work_request.scenario_id = j.at("scenario_id").get<std::string>();
        m.work_request.inputs = payloads_from_json(j.at("inputs"));
        m.work_request.warmup_iters = j.at("warmup_iters").get<int>();
        m.work_request.timed_runs = j.at("timed_runs").get<int>();
        m.work_request.bindings =
            j.at("bindings").get<std::map<std::string, std::string>>();
        m.work_request.capture = j.at("capture").get<bool>();
    } else if (type == "work_response") {
        m.work_response.scenario_id = j.at("scenario_id").get<std::string>();
        m.work_response.output = payload_from_json(j.at("output"));
        m.work_response.run_times_s = j.at("run_times_s").get<std::vector<double>>();
        m.work_response.units = j.at("units").get<double>();
        for (const auto& c : j.at("captures")) {
            SlotCapture sc;
            sc.slot = c.at("slot").get<std::string>();
            sc.inputs = payloads_from_json(c.at("inputs"));
            m.work_response.captures.push_back(std::move(sc));
        }
    } else if (type == "rank_request") {
        m.rank_request.scenario_id = j.at("scenario_id").get<std::string>();
        m.rank_request.inputs = payloads_from_json(j.at("inputs"));
    } else if (type == "rank_send" || type == "rank_recv") {
        m.rank_message.to = j.at("to").get<int>();
        m.rank_message.from = j.at("from").get<int>();
        m.rank_message.origin = j.at("origin").get<int>();
        m.rank_message.payload = payload_from_json(j.at("payload"));
    } else if (type == "rank_response") {
        m.scenario_id = j.at("scenario_id").get<std::string>();
        m.rank_output = payload_from_json(j.at("output"));
    } else if (type == "worker_error") {
        m.error.code = j.at("code").get<std::string>();
        m.error.message = j.at("message").get<std::string>();
    } else if (type == "shutdown") {
        // no fields
    } else {
        fail(Errc::parse_error, "unknown wire message type '" + type + "'");
    }
    return m;
}

}  // namespace fk
