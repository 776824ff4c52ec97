// SPDX-License-Identifier: Apache-2.0
#include "fk/harness.hpp"

#include <signal.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "fk/kernels.hpp"
#include "fk/subprocess.hpp"
#include "fk/wire.hpp"

#include "json.hpp"

namespace fk {

namespace {

bool locator_resolvable(const std::string& locator) {
    std::string spec;
    if (parse_builtin_locator(locator, spec)) return is_builtin(spec);
    return std::filesystem::exists(locator);
}

std::string resolved_worker_binary(const HarnessOptions& opts) {
    return opts.worker_binary.empty() ? worker_binary_path() : opts.worker_binary;
}

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

void WorkerProgram::validate() const {
    require(locator_resolvable(locator), Errc::unknown_builtin,
            "worker locator '" + locator + "' is not resolvable");
    require(timeout_s > 0.0, Errc::invalid_value, "timeout_s must be positive");
}

void TimingProtocol::validate() const {
    require(warmup_iters >= 0, Errc::invalid_value, "warmup_iters must be >= 0");
    require(timed_runs >= 1, Errc::invalid_value, "timed_runs must be >= 1");
}

// ---------------------------------------------------------------------------
// Task graph

const TaskNode& TaskGraph::node(const std::string& task_id) const {
    auto it = nodes_.find(task_id);
    require(it != nodes_.end(), Errc::unknown_task, "unknown task '" + task_id + "'");
    return it->second;
}

TaskGraph register_task_graph(const std::vector<TaskNode>& nodes) {
    TaskGraph g;
    for (const auto& n : nodes) {
        n.validate();
        require(g.nodes_.emplace(n.task_id, n).second, Errc::duplicate_id,
                "duplicate task_id '" + n.task_id + "'");
    }
    for (const auto& [id, n] : g.nodes_) {
        for (const auto& dep : n.dependencies) {
            auto it = g.nodes_.find(dep);
            require(it != g.nodes_.end(), Errc::dangling_dependency,
                    "task " + id + " depends on unregistered task '" + dep + "'");
            require(it->second.level < n.level, Errc::level_violation,
                    "task " + id + " (L" + std::to_string(n.level) + ") depends on '" + dep +
                        "' at level " + std::to_string(it->second.level));
        }
    }
    for (const auto& [id, n] : g.nodes_) g.topo_.push_back(id);
    std::sort(g.topo_.begin(), g.topo_.end(), [&g](const std::string& a, const std::string& b) {
        const TaskNode &na = g.nodes_.at(a), &nb = g.nodes_.at(b);
        return na.level != nb.level ? na.level < nb.level : a < b;
    });
    return g;
}

void TaskGraph::set_best_kernel(const std::string& task_id, const std::string& locator) {
    auto it = nodes_.find(task_id);
    require(it != nodes_.end(), Errc::unknown_task, "unknown task '" + task_id + "'");
    require(locator_resolvable(locator), Errc::unknown_builtin,
            "best kernel locator '" + locator + "' is not resolvable");
    it->second.best_kernel = locator;
}

std::map<std::string, std::string> TaskGraph::resolve_composition(
    const std::string& task_id, const Registry& registry) const {
    const TaskNode& n = node(task_id);
    std::map<std::string, std::string> bindings;
    for (const auto& dep : n.dependencies) {
        const TaskNode& d = node(dep);
        bindings[dep] =
            d.best_kernel ? *d.best_kernel : registry.item(d.item_id).reference_runner;
    }
    return bindings;
}

std::map<std::string, std::string> TaskGraph::resolve_transitive(
    const std::string& task_id, const Registry& registry) const {
    std::map<std::string, std::string> bindings;
    std::vector<std::string> stack{task_id};
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        for (const auto& [dep, locator] : resolve_composition(cur, registry)) {
            if (bindings.emplace(dep, locator).second) stack.push_back(dep);
        }
    }
    return bindings;
}

// ---------------------------------------------------------------------------
// Tier 1

namespace {

struct RefRun {
    std::map<std::string, WorkResponse> by_scenario;
};

WorkerProcess spawn_worker(const std::string& binary, const std::string& locator,
                           const std::string& role) {
    WorkerProcess::Options o;
    o.argv = {binary, locator};
    o.env_extra["FK_WORKER_ROLE"] = role;
    return WorkerProcess::spawn(o);
}

RefRun run_reference(const BenchmarkItem& item, const CaptureBundle& bundle,
                     const TimingProtocol& protocol, const HarnessOptions& opts,
                     bool capture = false,
                     const std::map<std::string, std::string>& bindings = {}) {
    WorkerProcess ref =
        spawn_worker(resolved_worker_binary(opts), item.reference_runner, "reference");
    RefRun out;
    for (const auto& scen : bundle.scenarios) {
        WorkRequest req;
        req.scenario_id = scen.scenario_id;
        req.inputs = scen.inputs;
        req.warmup_iters = protocol.warmup_iters;
        req.timed_runs = protocol.timed_runs;
        req.bindings = bindings;
        req.capture = capture;
        require(ref.write_line(encode_work_request(req)), Errc::reference_failure,
                "reference worker for " + item.item_id + " is gone");
        std::string line;
        ReadStatus rs = ref.read_line(line, opts.reference_timeout_s);
        require(rs == ReadStatus::Line, Errc::reference_failure,
                "reference worker for " + item.item_id +
                    (rs == ReadStatus::Timeout ? " timed out" : " closed its stream"));
        WireMessage msg = decode_wire(line);
        require(msg.type == "work_response", Errc::reference_failure,
                "reference worker failed on " + scen.scenario_id + ": " + msg.error.message);
        out.by_scenario[scen.scenario_id] = std::move(msg.work_response);
    }
    ref.write_line(encode_shutdown());
    ref.wait_clean_exit(5.0);
    return out;
}

RunStatus status_for_worker_error(const std::string& code) {
    if (code == errc_name(Errc::kind_mismatch)) return RunStatus::TypeError;
    if (code == errc_name(Errc::shape_mismatch)) return RunStatus::ShapeError;
    if (code == errc_name(Errc::invalid_value)) return RunStatus::TypeError;
    return RunStatus::Crash;
}

bool has_nan(const OutputPayload& p) {
    for (double v : p.values)
        if (std::isnan(v)) return true;
    return false;
}

}  // namespace

RunRecord run_pair(const BenchmarkItem& item, const WorkerProgram& candidate,
                   const CaptureBundle& bundle, const TimingProtocol& protocol,
                   const HarnessOptions& opts) {
    item.validate();
    protocol.validate();
    candidate.validate();
    require(bundle.item_id == item.item_id, Errc::invalid_value,
            "bundle " + bundle.bundle_id + " does not match item " + item.item_id);
    require(!bundle.scenarios.empty(), Errc::invalid_value,
            "bundle " + bundle.bundle_id + " has no scenarios");

    RefRun ref = run_reference(item, bundle, protocol, opts);

    RunRecord record;
    record.agent_id = opts.agent_id;
    record.item_id = item.item_id;
    record.status = RunStatus::Ok;

    nlohmann::json raw_times = {{"ref_run_times_s", nlohmann::json::object()},
                                {"cand_run_times_s", nlohmann::json::object()}};

    WorkerProcess cand =
        spawn_worker(resolved_worker_binary(opts), candidate.locator, "candidate");
    for (const auto& scen : bundle.scenarios) {
        WorkRequest req;
        req.scenario_id = scen.scenario_id;
        req.inputs = scen.inputs;
        req.warmup_iters = protocol.warmup_iters;
        req.timed_runs = protocol.timed_runs;
        req.bindings = candidate.bindings;
        if (!cand.write_line(encode_work_request(req))) {
            record.status = RunStatus::Crash;
            break;
        }
        std::string line;
        ReadStatus rs = cand.read_line(line, candidate.timeout_s);
        if (rs == ReadStatus::Timeout) {
            record.status = RunStatus::Hang;
            cand.kill_now();
            break;
        }
        if (rs == ReadStatus::Eof) {
            auto sig = cand.exit_signal(2.0);
            record.status = (sig && (*sig == SIGSEGV || *sig == SIGBUS))
                                ? RunStatus::IllegalMemory
                                : RunStatus::Crash;
            break;
        }
        WireMessage msg = decode_wire(line);
        if (msg.type == "worker_error") {
            record.status = status_for_worker_error(msg.error.code);
            break;
        }
        require(msg.type == "work_response", Errc::parse_error,
                "unexpected candidate message '" + msg.type + "'");
        const WorkResponse& cr = msg.work_response;
        const WorkResponse& rr = ref.by_scenario.at(scen.scenario_id);

        if (cr.output.kind != rr.output.kind) {
            record.status = RunStatus::TypeError;
            break;
        }
        if (cr.output.shape != rr.output.shape ||
            cr.output.values.size() != rr.output.values.size()) {
            record.status = RunStatus::ShapeError;
            break;
        }
        if ((cr.output.kind == PayloadKind::NumericTensor ||
             cr.output.kind == PayloadKind::Scalar) &&
            has_nan(cr.output)) {
            record.status = RunStatus::Nan;
            break;
        }

        ScenarioResult sr;
        sr.scenario_id = scen.scenario_id;
        sr.ref_output = rr.output;
        sr.cand_output = cr.output;
        sr.ref_runtime_s = std::max(mean(rr.run_times_s), 1e-12);
        sr.cand_runtime_s = std::max(mean(cr.run_times_s), 1e-12);
        sr.ref_throughput = rr.units / sr.ref_runtime_s;
        sr.cand_throughput = cr.units / sr.cand_runtime_s;
        sr.ref_latency_s = sr.ref_runtime_s;
        sr.cand_latency_s = sr.cand_runtime_s;
        record.scenarios.push_back(std::move(sr));

        raw_times["ref_run_times_s"][scen.scenario_id] = rr.run_times_s;
        raw_times["cand_run_times_s"][scen.scenario_id] = cr.run_times_s;
    }

    if (record.status == RunStatus::Ok) {
        cand.write_line(encode_shutdown());
        cand.wait_clean_exit(5.0);
        record.profile_attachment = raw_times.dump();
    } else {
        cand.kill_now();
        record.scenarios.clear();
    }
    record.validate();
    return record;
}

// ---------------------------------------------------------------------------
// Tier 2

E2EResult run_e2e(const TaskGraph& dag, const Registry& registry, const std::string& l4_task_id,
                  const CaptureBundle& workload, const TimingProtocol& protocol,
                  const HarnessOptions& opts) {
    const TaskNode& l4 = dag.node(l4_task_id);
    require(l4.level == 4, Errc::composition_failure,
            "task '" + l4_task_id + "' is not an L4 node");
    require(!workload.scenarios.empty(), Errc::composition_failure, "empty workload");
    const BenchmarkItem& item = registry.item(l4.item_id);
    auto bindings = dag.resolve_transitive(l4_task_id, registry);

    RefRun run;
    try {
        run = run_reference(item, workload, protocol, opts, /*capture=*/true, bindings);
    } catch (const Error& e) {
        fail(Errc::composition_failure, std::string("pipeline run failed: ") + e.what());
    }

    E2EResult out;
    // slot -> per-invocation capture scenarios, in workload order.
    std::map<std::string, std::vector<CaptureScenario>> per_slot;
    for (const auto& scen : workload.scenarios) {
        const WorkResponse& resp = run.by_scenario.at(scen.scenario_id);
        double runtime = std::max(mean(resp.run_times_s), 1e-12);
        out.measurements.push_back({scen.scenario_id, resp.units / runtime, runtime});
        std::map<std::string, int> ordinal;
        for (const auto& cap : resp.captures) {
            int n = ordinal[cap.slot]++;
            per_slot[cap.slot].push_back(
                {scen.scenario_id + "#" + std::to_string(n), cap.inputs});
        }
    }
    for (auto& [slot, scenarios] : per_slot) {
        if (dag.nodes().count(slot) == 0) continue;  // not a benchmark task
        CaptureBundle b;
        b.bundle_id = l4_task_id + "-" + slot;
        b.item_id = dag.node(slot).item_id;
        b.scenarios = std::move(scenarios);
        b.source = CaptureSource::EndToEndRun;
        b.seed = workload.seed;
        out.bundles.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tier 3

void compute_discrepancies(RunRecord& record, const Registry& registry,
                           const std::vector<DtypeTolerance>& dtype_table,
                           const DispatchConfig& cfg) {
    if (record.status != RunStatus::Ok) return;
    const BenchmarkItem& item = registry.item(record.item_id);
    const FamilySpec& family = registry.family(item.family_id);
    const DtypeTolerance& tol = lookup_tolerance(dtype_table, item.dtype);
    for (auto& scen : record.scenarios) dispatch_discrepancy(family, scen, tol, cfg);
}

std::map<std::string, ScoreCard> run_eval_sweep(
    const std::map<std::string, AgentBindings>& agents, const Registry& registry,
    const ThresholdManifest& manifest, const std::map<std::string, CaptureBundle>& bundles,
    const TimingProtocol& protocol, const HarnessOptions& opts) {
    require(manifest.frozen(), Errc::unfrozen_manifest,
            "run_eval_sweep needs a frozen manifest");

    std::map<std::string, ScoreCard> cards;
    for (const auto& [agent, bindings] : agents) {
        HarnessOptions agent_opts = opts;
        agent_opts.agent_id = agent;
        std::vector<RunRecord> records;
        for (const auto& [item_id, item] : registry.items()) {
            auto found = bindings.find(item_id);
            if (found == bindings.end()) {
                RunRecord blocked;
                blocked.agent_id = agent;
                blocked.item_id = item_id;
                blocked.status = RunStatus::Blocked;
                records.push_back(std::move(blocked));
                continue;
            }
            auto bundle = bundles.find(item_id);
            require(bundle != bundles.end(), Errc::invalid_value,
                    "no standard bundle for item " + item_id);
            RunRecord rec = run_pair(item, found->second, bundle->second, protocol, agent_opts);
            compute_discrepancies(rec, registry, manifest.dtype_table());
            records.push_back(std::move(rec));
        }
        cards[agent] = build_scorecard(records, registry, manifest);
    }
    return cards;
}

// ---------------------------------------------------------------------------
// Simulated all-reduce

std::vector<AllReduceOutcome> allreduce_check(const WorkerProgram& candidate, int ranks,
                                              const std::vector<AllReduceScenario>& scenarios,
                                              double band_g, double timeout_s,
                                              const HarnessOptions& opts) {
    require(ranks >= 2, Errc::invalid_value,
            "all-reduce needs >= 2 ranks (a single rank degenerates to identity)");
    candidate.validate();

    std::string binary = resolved_worker_binary(opts);
    std::vector<WorkerProcess> workers;
    workers.reserve(static_cast<std::size_t>(ranks));
    for (int r = 0; r < ranks; ++r) {
        WorkerProcess::Options o;
        o.argv = {binary, candidate.locator};
        o.env_extra["FK_WORKER_ROLE"] = "rank-" + std::to_string(r);
        o.env_extra["FK_WORLD_SIZE"] = std::to_string(ranks);
        workers.push_back(WorkerProcess::spawn(o));
    }
    std::vector<WorkerProcess*> handles;
    for (auto& w : workers) handles.push_back(&w);

    DtypeTolerance fp32 = lookup_tolerance(default_dtype_table(), Dtype::FP32);
    std::vector<AllReduceOutcome> outcomes;
    for (const auto& scen : scenarios) {
        require(scen.per_rank.size() == static_cast<std::size_t>(ranks), Errc::invalid_value,
                "scenario " + scen.scenario_id + " does not provide one vector per rank");

        // Reference: elementwise sum across ranks, identical on every rank.
        OutputPayload expected = scen.per_rank[0];
        for (int r = 1; r < ranks; ++r) {
            require(scen.per_rank[static_cast<std::size_t>(r)].shape == expected.shape,
                    Errc::shape_mismatch, "rank inputs must share a shape");
            for (std::size_t i = 0; i < expected.values.size(); ++i)
                expected.values[i] += scen.per_rank[static_cast<std::size_t>(r)].values[i];
        }

        for (int r = 0; r < ranks; ++r) {
            RankHello hello{scen.scenario_id, {scen.per_rank[static_cast<std::size_t>(r)]}};
            require(workers[static_cast<std::size_t>(r)].write_line(encode_rank_request(hello)),
                    Errc::channel_timeout, "rank " + std::to_string(r) + " is gone");
        }

        std::map<int, OutputPayload> responses;
        double deadline = timeout_s;
        while (responses.size() < static_cast<std::size_t>(ranks)) {
            auto ready = poll_workers(handles, deadline);
            require(!ready.empty(), Errc::channel_timeout,
                    "all-reduce channel timed out on scenario " + scen.scenario_id);
            bool progressed = false;
            for (std::size_t w : ready) {
                for (;;) {
                    std::string line;
                    ReadStatus rs = workers[w].poll_line(line);
                    if (rs == ReadStatus::Timeout) break;
                    require(rs == ReadStatus::Line, Errc::channel_timeout,
                            "rank " + std::to_string(w) + " closed its stream");
                    WireMessage msg = decode_wire(line);
                    if (msg.type == "rank_send") {
                        int to = msg.rank_message.to;
                        require(to >= 0 && to < ranks, Errc::invalid_value,
                                "rank_send to out-of-range rank");
                        msg.rank_message.from = static_cast<int>(w);
                        require(workers[static_cast<std::size_t>(to)].write_line(
                                    encode_rank_recv(msg.rank_message)),
                                Errc::channel_timeout,
                                "rank " + std::to_string(to) + " is gone");
                    } else if (msg.type == "rank_response") {
                        responses[static_cast<int>(w)] = msg.rank_output;
                    } else if (msg.type == "worker_error") {
                        fail(Errc::channel_timeout,
                             "rank " + std::to_string(w) + " failed: " + msg.error.message);
                    }
                    progressed = true;
                }
            }
            (void)progressed;
        }

        AllReduceOutcome outcome;
        outcome.scenario_id = scen.scenario_id;
        outcome.pass = true;
        for (int r = 0; r < ranks; ++r) {
            AllReduceRankResult rr;
            rr.rank = r;
            const OutputPayload& got = responses.at(r);
            if (got.shape != expected.shape) {
                rr.d = std::numeric_limits<double>::infinity();
                rr.pass = false;
            } else {
                rr.d = elementwise_error_ratio(got, expected, fp32).d;
                rr.pass = rr.d <= band_g;
            }
            outcome.pass = outcome.pass && rr.pass;
            outcome.ranks.push_back(rr);
        }
        outcomes.push_back(std::move(outcome));
    }

    for (auto& w : workers) {
        w.write_line(encode_shutdown());
        w.wait_clean_exit(2.0);
    }
    return outcomes;
}

std::vector<AllReduceScenario> make_allreduce_scenarios(int ranks, int count, int vec_len,
                                                        std::uint64_t seed) {
    std::vector<AllReduceScenario> out;
    for (int s = 0; s < count; ++s) {
        AllReduceScenario scen;
        scen.scenario_id = "ar" + std::to_string(s);
        for (int r = 0; r < ranks; ++r) {
            DetRng rng(seed ^ fnv1a("ar" + std::to_string(s) + "#" + std::to_string(r)));
            std::vector<double> v(static_cast<std::size_t>(vec_len));
            for (auto& x : v) x = rng.symmetric();
            scen.per_rank.push_back(
                OutputPayload::tensor({static_cast<std::int64_t>(vec_len)}, std::move(v)));
        }
        out.push_back(std::move(scen));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy suite

ToySuite toy_kernel_suite() {
    std::vector<FamilySpec> families = {
        {"activation", DiscrepancyKind::ElementwiseNumeric, 3.0, 1.0},
        {"blas", DiscrepancyKind::ElementwiseNumeric, 3.0, 1.0},
        {"norm", DiscrepancyKind::ElementwiseNumeric, 3.0, 1.0},
        {"pipeline", DiscrepancyKind::ElementwiseNumeric, 3.0, 1.0},
        {"routing", DiscrepancyKind::RankingTopK, 0.5, 1.0},
    };
    std::vector<std::string> scenarios = {"s0", "s1", "s2"};
    std::vector<BenchmarkItem> items = {
        {"rmsnorm", "norm", 1, Dtype::FP32, scenarios, builtin_locator("rmsnorm")},
        {"linear", "blas", 1, Dtype::FP32, scenarios, builtin_locator("linear")},
        {"gelu", "activation", 1, Dtype::FP32, scenarios, builtin_locator("gelu")},
        {"softmax", "activation", 1, Dtype::FP32, scenarios, builtin_locator("softmax")},
        {"moe_gate", "routing", 1, Dtype::FP32, scenarios, builtin_locator("moe_gate")},
        {"mlp", "blas", 2, Dtype::FP32, scenarios, builtin_locator("mlp")},
        {"block", "pipeline", 3, Dtype::FP32, scenarios, builtin_locator("block")},
        {"pipeline", "pipeline", 4, Dtype::FP32, scenarios, builtin_locator("pipeline")},
    };
    std::vector<TaskNode> nodes = {
        {"rmsnorm", "rmsnorm", 1, {}, std::nullopt},
        {"linear", "linear", 1, {}, std::nullopt},
        {"gelu", "gelu", 1, {}, std::nullopt},
        {"softmax", "softmax", 1, {}, std::nullopt},
        {"moe_gate", "moe_gate", 1, {}, std::nullopt},
        {"mlp", "mlp", 2, {"linear", "gelu"}, std::nullopt},
        {"block", "block", 3, {"rmsnorm", "mlp"}, std::nullopt},
        {"pipeline", "pipeline", 4, {"block", "rmsnorm"}, std::nullopt},
    };
    ToySuite suite;
    suite.registry = validate_registry(families, items);
    suite.graph = register_task_graph(nodes);
    return suite;
}

ThresholdManifest default_toy_manifest(const Registry& registry) {
    std::map<std::string, ThresholdInput> per_item;
    for (const auto& [id, item] : registry.items()) {
        const FamilySpec& family = registry.family(item.family_id);
        ThresholdInput in;
        if (family.discrepancy_kind == DiscrepancyKind::ElementwiseNumeric) {
            in.g = 1.0;  // the dtype band in ratio space
            in.f = family.default_fail_threshold;
        } else {
            in.g = 0.0;
            in.f = family.default_fail_threshold;
        }
        in.tau = family.default_validity_threshold;
        per_item[id] = in;
    }
    return freeze_manifest(per_item, default_dtype_table());
}

namespace {

OutputPayload random_tensor(DetRng& rng, std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.symmetric();
    return OutputPayload::tensor(std::move(shape), std::move(v));
}

}  // namespace

CaptureBundle make_standard_bundle(const BenchmarkItem& item, std::uint64_t seed) {
    std::string spec;
    require(parse_builtin_locator(item.reference_runner, spec), Errc::unknown_builtin,
            "standard bundles exist only for builtin items");

    CaptureBundle b;
    b.bundle_id = "std-" + item.item_id;
    b.item_id = item.item_id;
    b.source = CaptureSource::Synthetic;
    b.seed = static_cast<std::int64_t>(seed);

    constexpr std::int64_t T = 8, D = 32, H = 48;
    for (const auto& sid : item.scenario_ids) {
        DetRng rng(seed ^ fnv1a(item.item_id + "/" + sid));
        CaptureScenario scen;
        scen.scenario_id = sid;
        if (spec == "rmsnorm") {
            scen.inputs = {random_tensor(rng, {T, D}), random_tensor(rng, {D}),
                           OutputPayload::scalar(1e-6)};
        } else if (spec == "linear") {
            scen.inputs = {random_tensor(rng, {16, 24}), random_tensor(rng, {24, 12})};
        } else if (spec == "gelu" || spec == "softmax") {
            scen.inputs = {random_tensor(rng, {T, D})};
        } else if (spec == "moe_gate") {
            scen.inputs = {random_tensor(rng, {D})};
        } else if (spec == "mlp") {
            scen.inputs = {random_tensor(rng, {T, D}), random_tensor(rng, {D, H}),
                           random_tensor(rng, {H, D})};
        } else if (spec == "block") {
            scen.inputs = {random_tensor(rng, {T, D}), random_tensor(rng, {D}),
                           random_tensor(rng, {D, H}), random_tensor(rng, {H, D})};
        } else if (spec == "pipeline") {
            scen.inputs = {random_tensor(rng, {T, D}), random_tensor(rng, {D}),
                           random_tensor(rng, {D, H}), random_tensor(rng, {H, D}),
                           random_tensor(rng, {D}),    random_tensor(rng, {D, H}),
                           random_tensor(rng, {H, D}), random_tensor(rng, {D})};
        } else {
            fail(Errc::unknown_builtin, "no standard bundle recipe for '" + spec + "'");
        }
        b.scenarios.push_back(std::move(scen));
    }
    return b;
}

std::map<std::string, CaptureBundle> make_standard_bundles(const Registry& registry,
                                                           std::uint64_t seed) {
    std::map<std::string, CaptureBundle> out;
    for (const auto& [id, item] : registry.items()) out[id] = make_standard_bundle(item, seed);
    return out;
}

// ---------------------------------------------------------------------------
// Calibration workloads

double downstream_quality(const OutputPayload& cand, const OutputPayload& ref) {
    if (ref.kind == PayloadKind::RankedIds) {
        require(cand.kind == PayloadKind::RankedIds, Errc::kind_mismatch,
                "quality expects matching payload kinds");
        if (cand.values.empty() || ref.values.empty()) return 0.0;
        return cand.values[0] == ref.values[0] ? 1.0 : 0.0;
    }
    require(ref.kind == PayloadKind::NumericTensor && cand.kind == PayloadKind::NumericTensor,
            Errc::kind_mismatch, "quality expects numeric or ranked payloads");
    require(ref.shape == cand.shape, Errc::shape_mismatch, "quality expects matching shapes");
    std::int64_t cols = ref.shape.empty() ? 1 : ref.shape.back();
    std::int64_t rows = static_cast<std::int64_t>(ref.values.size()) / std::max<std::int64_t>(cols, 1);
    if (rows == 0) return 0.0;
    std::int64_t agree = 0;
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* a = cand.values.data() + r * cols;
        const double* b = ref.values.data() + r * cols;
        std::int64_t ia = 0, ib = 0;
        for (std::int64_t c = 1; c < cols; ++c) {
            if (a[c] > a[ia]) ia = c;
            if (b[c] > b[ib]) ib = c;
        }
        if (ia == ib) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(rows);
}

std::map<std::string, OutputPayload> reference_outputs(const BenchmarkItem& item,
                                                       const CaptureBundle& bundle,
                                                       const TimingProtocol& protocol,
                                                       const HarnessOptions& opts) {
    RefRun run = run_reference(item, bundle, protocol, opts);
    std::map<std::string, OutputPayload> out;
    for (auto& [sid, resp] : run.by_scenario) out[sid] = std::move(resp.output);
    return out;
}

CliffCurve generate_cliff_curve(const BenchmarkItem& item, const Registry& registry,
                                const CaptureBundle& bundle,
                                const std::vector<double>& amplitudes,
                                const TimingProtocol& protocol, const HarnessOptions& opts) {
    std::string spec;
    require(parse_builtin_locator(item.reference_runner, spec), Errc::unknown_builtin,
            "cliff curves exist only for builtin items");
    const FamilySpec& family = registry.family(item.family_id);
    DtypeTolerance tol = lookup_tolerance(default_dtype_table(), item.dtype);

    std::vector<CliffPoint> raw;
    for (double amp : amplitudes) {
        WorkerProgram noisy;
        noisy.locator = builtin_locator(amp == 0.0 ? spec
                                                   : "noise:" + spec + ":" + std::to_string(amp));
        noisy.role = WorkerProgram::Role::Candidate;
        RunRecord rec = run_pair(item, noisy, bundle, protocol, opts);
        require(rec.status == RunStatus::Ok, Errc::invalid_value,
                "noisy candidate failed while fitting the cliff for " + item.item_id);
        double worst_d = 0.0;
        double q_sum = 0.0;
        for (auto& scen : rec.scenarios) {
            DiscrepancyReport rep = dispatch_discrepancy(family, scen, tol);
            worst_d = std::max(worst_d, rep.d);
            q_sum += downstream_quality(scen.cand_output, scen.ref_output);
        }
        raw.push_back({worst_d, q_sum / static_cast<double>(rec.scenarios.size())});
    }

    std::sort(raw.begin(), raw.end(),
              [](const CliffPoint& a, const CliffPoint& b) { return a.discrepancy < b.discrepancy; });
    CliffCurve curve;
    for (const auto& p : raw) {
        if (!curve.points.empty() && p.discrepancy <= curve.points.back().discrepancy) continue;
        curve.points.push_back(p);
    }
    curve.validate();
    return curve;
}

// ---------------------------------------------------------------------------
// Toy gate traffic

OutputPayload toy_gate_logits(const std::string& source, int tokens, int experts,
                              std::uint64_t seed) {
    require(tokens > 0 && experts > 1, Errc::invalid_value, "need tokens > 0, experts > 1");
    DetRng rng(seed ^ fnv1a("gate/" + source));
    std::vector<double> logits(static_cast<std::size_t>(tokens * experts));

    if (source == "random-tensor") {
        // Unstructured activations: a near-uniform gate.
        for (auto& v : logits) v = rng.symmetric();
    } else if (source == "random-tokens" || source == "captured") {
        // Structured traffic: a source-specific hot set gets a decaying
        // baseline boost, and each token additionally prefers one expert
        // drawn from a long-tailed rank distribution. Random token ids
        // over-concentrate relative to captured requests.
        bool synthetic_tokens = source == "random-tokens";
        double zipf_s = synthetic_tokens ? 1.8 : 1.2;
        double baseline = synthetic_tokens ? 3.0 : 2.0;

        std::vector<int> hot(static_cast<std::size_t>(experts));
        std::iota(hot.begin(), hot.end(), 0);
        DetRng perm(fnv1a("perm/" + source) ^ seed);
        for (std::size_t i = hot.size(); i > 1; --i)
            std::swap(hot[i - 1], hot[perm.next() % i]);

        std::vector<double> cdf(static_cast<std::size_t>(experts));
        double acc = 0.0;
        for (int r = 0; r < experts; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), zipf_s);
            cdf[static_cast<std::size_t>(r)] = acc;
        }
        for (auto& c : cdf) c /= acc;

        for (int t = 0; t < tokens; ++t) {
            double u = rng.uniform();
            int rank = static_cast<int>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            rank = std::min(rank, experts - 1);
            int preferred = hot[static_cast<std::size_t>(rank)];
            double* row = logits.data() + static_cast<std::size_t>(t * experts);
            for (int e = 0; e < experts; ++e) row[e] = 0.5 * rng.symmetric();
            for (int r = 0; r < experts; ++r)
                row[hot[static_cast<std::size_t>(r)]] +=
                    baseline * std::exp(-static_cast<double>(r) / 5.0);
            row[preferred] += 4.0;
        }
    } else {
        fail(Errc::invalid_value, "unknown gate source '" + source + "'");
    }
    return OutputPayload::tensor({tokens, experts}, std::move(logits));
}

}  // namespace fk
