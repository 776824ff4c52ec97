// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities: worker/CLI paths, file fixtures, randomized value
// generators for round-trip properties, and bitwise equality helpers.
#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fk/core.hpp"
#include "fk/harness.hpp"
#include "fk/kernels.hpp"
#include "fk/records.hpp"

#ifndef FK_BUILD_DIR
#define FK_BUILD_DIR "."
#endif
#ifndef FK_DATA_DIR
#define FK_DATA_DIR "."
#endif

namespace fktest {

inline std::string worker_path() { return std::string(FK_BUILD_DIR) + "/fk-worker"; }
inline std::string cli_path() { return std::string(FK_BUILD_DIR) + "/fkbench"; }
inline std::string data_path(const std::string& name) {
    return std::string(FK_DATA_DIR) + "/" + name;
}

inline fk::HarnessOptions harness_opts(const std::string& agent = "agent") {
    fk::HarnessOptions o;
    o.worker_binary = worker_path();
    o.agent_id = agent;
    return o;
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

// Runs the CLI, capturing stdout (stderr passes through).
inline CliResult run_cli(const std::string& args) {
    CliResult r;
    std::string cmd = cli_path() + " " + args;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = ::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = ::pclose(pipe);
    r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Bitwise equality (NaN-safe)

inline bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

inline bool payload_equal(const fk::OutputPayload& a, const fk::OutputPayload& b) {
    if (a.kind != b.kind || a.shape != b.shape || a.values.size() != b.values.size())
        return false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (!bits_equal(a.values[i], b.values[i])) return false;
    return true;
}

inline bool scenario_equal(const fk::ScenarioResult& a, const fk::ScenarioResult& b) {
    if (a.scenario_id != b.scenario_id) return false;
    if (!payload_equal(a.ref_output, b.ref_output)) return false;
    if (!payload_equal(a.cand_output, b.cand_output)) return false;
    if (!bits_equal(a.ref_runtime_s, b.ref_runtime_s)) return false;
    if (!bits_equal(a.cand_runtime_s, b.cand_runtime_s)) return false;
    if (!bits_equal(a.ref_throughput, b.ref_throughput)) return false;
    if (!bits_equal(a.cand_throughput, b.cand_throughput)) return false;
    if (!bits_equal(a.ref_latency_s, b.ref_latency_s)) return false;
    if (!bits_equal(a.cand_latency_s, b.cand_latency_s)) return false;
    if (a.discrepancy.has_value() != b.discrepancy.has_value()) return false;
    if (a.discrepancy && !bits_equal(*a.discrepancy, *b.discrepancy)) return false;
    return true;
}

inline bool record_equal(const fk::RunRecord& a, const fk::RunRecord& b) {
    if (a.agent_id != b.agent_id || a.item_id != b.item_id || a.status != b.status) return false;
    if (a.profile_attachment != b.profile_attachment) return false;
    if (a.scenarios.size() != b.scenarios.size()) return false;
    for (std::size_t i = 0; i < a.scenarios.size(); ++i)
        if (!scenario_equal(a.scenarios[i], b.scenarios[i])) return false;
    return true;
}

inline bool capture_equal(const fk::CaptureBundle& a, const fk::CaptureBundle& b) {
    if (a.bundle_id != b.bundle_id || a.item_id != b.item_id || a.source != b.source ||
        a.seed != b.seed || a.scenarios.size() != b.scenarios.size())
        return false;
    for (std::size_t i = 0; i < a.scenarios.size(); ++i) {
        if (a.scenarios[i].scenario_id != b.scenarios[i].scenario_id) return false;
        if (a.scenarios[i].inputs.size() != b.scenarios[i].inputs.size()) return false;
        for (std::size_t j = 0; j < a.scenarios[i].inputs.size(); ++j)
            if (!payload_equal(a.scenarios[i].inputs[j], b.scenarios[i].inputs[j])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Randomized generators (deterministic per seed)

inline fk::OutputPayload gen_payload(fk::DetRng& rng, bool allow_nonfinite = true) {
    using fk::OutputPayload;
    switch (rng.next() % 4) {
        case 0: {
            std::int64_t rows = 1 + static_cast<std::int64_t>(rng.next() % 4);
            std::int64_t cols = 1 + static_cast<std::int64_t>(rng.next() % 5);
            std::vector<double> v(static_cast<std::size_t>(rows * cols));
            for (auto& x : v) {
                x = 20.0 * rng.symmetric();
                if (allow_nonfinite && rng.next() % 17 == 0)
                    x = rng.next() % 2 ? std::numeric_limits<double>::quiet_NaN()
                                       : std::numeric_limits<double>::infinity();
            }
            return OutputPayload{fk::PayloadKind::NumericTensor, {rows, cols}, std::move(v)};
        }
        case 1: {
            std::vector<std::int64_t> ids(1 + rng.next() % 8);
            for (auto& id : ids) id = static_cast<std::int64_t>(rng.next() % 50000);
            return OutputPayload::tokens(std::move(ids));
        }
        case 2: {
            std::size_t n = 1 + rng.next() % 8;
            std::vector<std::int64_t> ids;
            for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<std::int64_t>(i * 3));
            return OutputPayload::ranking(std::move(ids));
        }
        default:
            return OutputPayload::scalar(rng.symmetric());
    }
}

inline fk::ScenarioResult gen_scenario(fk::DetRng& rng, int idx) {
    fk::ScenarioResult s;
    s.scenario_id = "s" + std::to_string(idx);
    s.ref_output = gen_payload(rng, /*allow_nonfinite=*/false);
    s.cand_output = gen_payload(rng);
    s.ref_runtime_s = 1e-6 + rng.uniform();
    s.cand_runtime_s = 1e-6 + rng.uniform();
    s.ref_throughput = 1.0 + rng.uniform() * 100.0;
    s.cand_throughput = 1.0 + rng.uniform() * 100.0;
    s.ref_latency_s = 1e-6 + rng.uniform();
    s.cand_latency_s = 1e-6 + rng.uniform();
    if (rng.next() % 3 != 0)
        s.discrepancy = rng.next() % 7 == 0 ? std::numeric_limits<double>::infinity()
                                            : rng.uniform() * 4.0;
    return s;
}

inline fk::RunRecord gen_record(fk::DetRng& rng) {
    fk::RunRecord r;
    r.agent_id = "agent" + std::to_string(rng.next() % 5);
    r.item_id = "item" + std::to_string(rng.next() % 9);
    if (rng.next() % 3 == 0) {
        const fk::RunStatus bad[] = {fk::RunStatus::Blocked,     fk::RunStatus::Crash,
                                     fk::RunStatus::Hang,        fk::RunStatus::ShapeError,
                                     fk::RunStatus::IllegalMemory, fk::RunStatus::Nan,
                                     fk::RunStatus::TypeError};
        r.status = bad[rng.next() % 7];
    } else {
        r.status = fk::RunStatus::Ok;
        int n = 1 + static_cast<int>(rng.next() % 4);
        for (int i = 0; i < n; ++i) r.scenarios.push_back(gen_scenario(rng, i));
    }
    if (rng.next() % 4 == 0) r.profile_attachment = "blob-" + std::to_string(rng.next() % 1000);
    return r;
}

inline fk::CaptureBundle gen_capture(fk::DetRng& rng) {
    fk::CaptureBundle b;
    b.bundle_id = "b" + std::to_string(rng.next() % 1000);
    b.item_id = "item" + std::to_string(rng.next() % 9);
    b.source = rng.next() % 2 ? fk::CaptureSource::EndToEndRun : fk::CaptureSource::Synthetic;
    b.seed = static_cast<std::int64_t>(rng.next() % 100000);
    int n = 1 + static_cast<int>(rng.next() % 3);
    for (int i = 0; i < n; ++i) {
        fk::CaptureScenario s;
        s.scenario_id = "s" + std::to_string(i);
        int m = 1 + static_cast<int>(rng.next() % 3);
        for (int j = 0; j < m; ++j) s.inputs.push_back(gen_payload(rng));
        b.scenarios.push_back(std::move(s));
    }
    return b;
}

inline fk::ThresholdManifest gen_manifest(fk::DetRng& rng) {
    std::map<std::string, fk::ThresholdEntry> per_item;
    int n = 1 + static_cast<int>(rng.next() % 6);
    for (int i = 0; i < n; ++i) {
        fk::ThresholdEntry e;
        e.g = rng.uniform() * 2.0;
        e.f = e.g + 0.1 + rng.uniform() * 5.0;
        e.tau = rng.uniform();
        per_item["item" + std::to_string(i)] = e;
    }
    fk::ThresholdManifest m(std::move(per_item), fk::default_dtype_table(), rng.next() % 2 == 0,
                            0.25 + rng.uniform() * 4.0);
    return m;
}

inline fk::ScoreCard gen_scorecard(fk::DetRng& rng) {
    fk::ScoreCard c;
    c.agent_id = "agent" + std::to_string(rng.next() % 5);
    c.c_macro = rng.uniform();
    c.coverage_item = rng.uniform();
    c.coverage_macro = rng.uniform();
    c.coverage_attempted = rng.uniform();
    if (rng.next() % 4 != 0) {
        for (double lam : {0.0, 0.5, 1.0}) c.s_macro_by_lambda[lam] = 0.1 + rng.uniform() * 3.0;
        c.score_default = c.s_macro_by_lambda[0.5] * c.c_macro * c.coverage_macro;
    }
    int nf = 1 + static_cast<int>(rng.next() % 4);
    for (int i = 0; i < nf; ++i) {
        fk::FamilyScore fs;
        fs.c_f = rng.uniform();
        fs.coverage_f = rng.uniform();
        fs.item_count = 1 + static_cast<int>(rng.next() % 9);
        fs.valid_count = static_cast<int>(rng.next() % (fs.item_count + 1));
        if (rng.next() % 2) fs.s_f = 0.1 + rng.uniform() * 3.0;
        std::string id = "family" + std::to_string(i);
        if (fs.s_f) c.valid_families.insert(id);
        c.per_family[id] = fs;
    }
    c.fast_at_1 = static_cast<int>(rng.next() % 10);
    c.fast_at_1_5 = static_cast<int>(rng.next() % 5);
    if (rng.next() % 2) {
        std::map<std::string, std::pair<double, double>> ci;
        for (const auto& [id, fs] : c.per_family) {
            double lo = 0.1 + rng.uniform();
            ci[id] = {lo, lo + rng.uniform()};
        }
        c.ci_by_family = std::move(ci);
    }
    return c;
}

inline bool scorecard_equal(const fk::ScoreCard& a, const fk::ScoreCard& b) {
    if (a.agent_id != b.agent_id) return false;
    if (!bits_equal(a.c_macro, b.c_macro) || !bits_equal(a.coverage_item, b.coverage_item) ||
        !bits_equal(a.coverage_macro, b.coverage_macro) ||
        !bits_equal(a.coverage_attempted, b.coverage_attempted) ||
        !bits_equal(a.score_default, b.score_default))
        return false;
    if (a.s_macro_by_lambda != b.s_macro_by_lambda) return false;
    if (a.valid_families != b.valid_families) return false;
    if (a.fast_at_1 != b.fast_at_1 || a.fast_at_1_5 != b.fast_at_1_5) return false;
    if (a.per_family.size() != b.per_family.size()) return false;
    for (const auto& [id, fa] : a.per_family) {
        auto it = b.per_family.find(id);
        if (it == b.per_family.end()) return false;
        const auto& fb = it->second;
        if (!bits_equal(fa.c_f, fb.c_f) || !bits_equal(fa.coverage_f, fb.coverage_f) ||
            fa.valid_count != fb.valid_count || fa.item_count != fb.item_count ||
            fa.s_f != fb.s_f)
            return false;
    }
    if (a.ci_by_family != b.ci_by_family) return false;
    return true;
}

inline bool manifest_equal(const fk::ThresholdManifest& a, const fk::ThresholdManifest& b) {
    if (a.frozen() != b.frozen() || !bits_equal(a.tolerance_scale(), b.tolerance_scale()))
        return false;
    if (a.per_item().size() != b.per_item().size()) return false;
    for (const auto& [id, ea] : a.per_item()) {
        auto it = b.per_item().find(id);
        if (it == b.per_item().end()) return false;
        if (!bits_equal(ea.g, it->second.g) || !bits_equal(ea.f, it->second.f) ||
            !bits_equal(ea.tau, it->second.tau))
            return false;
    }
    if (a.dtype_table().size() != b.dtype_table().size()) return false;
    for (std::size_t i = 0; i < a.dtype_table().size(); ++i) {
        if (a.dtype_table()[i].dtype != b.dtype_table()[i].dtype ||
            !bits_equal(a.dtype_table()[i].atol, b.dtype_table()[i].atol) ||
            !bits_equal(a.dtype_table()[i].rtol, b.dtype_table()[i].rtol))
            return false;
    }
    return true;
}

}  // namespace fktest
