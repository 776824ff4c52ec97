// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale execution engine: the L1-L4 task graph with kernel reuse,
// subprocess-isolated baseline/candidate pairs (Tier 1), end-to-end pipeline
// runs with golden-input capture (Tier 2), standardized evaluation sweeps
// (Tier 3) and the simulated multi-rank all-reduce check.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fk/calibration.hpp"
#include "fk/core.hpp"
#include "fk/discrepancy.hpp"
#include "fk/records.hpp"
#include "fk/scoring.hpp"

namespace fk {

struct WorkerProgram {
    std::string locator;  // "builtin:<spec>" or an executable path
    enum class Role { Reference, Candidate } role = Role::Candidate;
    double timeout_s = 60.0;  // per scenario
    std::map<std::string, std::string> bindings;  // named sub-kernel slots

    void validate() const;  // locator must be resolvable
};

struct TimingProtocol {
    int warmup_iters = 10;
    int timed_runs = 3;
    enum class Reduction { Mean } reduction = Reduction::Mean;

    void validate() const;
};

// Validated DAG over TaskNodes; dependencies always sit at strictly lower
// levels, so acyclicity holds by construction. Topological order is
// (level, task_id), a pure function of the node set.
class TaskGraph {
  public:
    const std::map<std::string, TaskNode>& nodes() const { return nodes_; }
    const TaskNode& node(const std::string& task_id) const;
    const std::vector<std::string>& topo_order() const { return topo_; }

    void set_best_kernel(const std::string& task_id, const std::string& locator);

    // Direct dependencies: best_kernel when registered, else the dependency
    // item's reference runner.
    std::map<std::string, std::string> resolve_composition(const std::string& task_id,
                                                           const Registry& registry) const;
    // Same rule applied over all transitive dependencies.
    std::map<std::string, std::string> resolve_transitive(const std::string& task_id,
                                                          const Registry& registry) const;

  private:
    friend TaskGraph register_task_graph(const std::vector<TaskNode>& nodes);
    std::map<std::string, TaskNode> nodes_;
    std::vector<std::string> topo_;
};

TaskGraph register_task_graph(const std::vector<TaskNode>& nodes);

struct HarnessOptions {
    std::string worker_binary;        // empty -> resolve fk-worker automatically
    std::string agent_id = "agent";
    double reference_timeout_s = 60.0;
};

// Tier 1: reference and candidate in separate worker processes over one
// bundle. Candidate faults land in the record's status; a reference failure
// throws (the reference is trusted).
RunRecord run_pair(const BenchmarkItem& item, const WorkerProgram& candidate,
                   const CaptureBundle& bundle, const TimingProtocol& protocol,
                   const HarnessOptions& opts = {});

struct E2EMeasurement {
    std::string scenario_id;
    double throughput = 0.0;
    double latency_s = 0.0;
};

struct E2EResult {
    std::vector<E2EMeasurement> measurements;
    std::vector<CaptureBundle> bundles;  // one per captured sub-kernel task
};

// Tier 2: runs the composed L4 pipeline over a workload and captures every
// sub-kernel invocation's inputs.
E2EResult run_e2e(const TaskGraph& dag, const Registry& registry, const std::string& l4_task_id,
                  const CaptureBundle& workload, const TimingProtocol& protocol,
                  const HarnessOptions& opts = {});

using AgentBindings = std::map<std::string, WorkerProgram>;  // item_id -> candidate

// Tier 3: Tier-1 pairs over the standard bundles for every agent and item,
// scored against a frozen manifest. Items without a binding count as
// blocked.
std::map<std::string, ScoreCard> run_eval_sweep(
    const std::map<std::string, AgentBindings>& agents, const Registry& registry,
    const ThresholdManifest& manifest, const std::map<std::string, CaptureBundle>& bundles,
    const TimingProtocol& protocol, const HarnessOptions& opts = {});

// Caches D_f into every scenario of an ok record.
void compute_discrepancies(RunRecord& record, const Registry& registry,
                           const std::vector<DtypeTolerance>& dtype_table,
                           const DispatchConfig& cfg = {});

struct AllReduceScenario {
    std::string scenario_id;
    std::vector<OutputPayload> per_rank;  // one vector per rank
};

struct AllReduceRankResult {
    int rank = 0;
    double d = 0.0;
    bool pass = false;
};

struct AllReduceOutcome {
    std::string scenario_id;
    bool pass = false;
    std::vector<AllReduceRankResult> ranks;
};

// Spawns `ranks` workers joined by an in-harness message channel; a scenario
// passes iff every rank's output matches the elementwise sum across ranks
// within the band.
std::vector<AllReduceOutcome> allreduce_check(const WorkerProgram& candidate, int ranks,
                                              const std::vector<AllReduceScenario>& scenarios,
                                              double band_g = 1.0, double timeout_s = 30.0,
                                              const HarnessOptions& opts = {});

std::vector<AllReduceScenario> make_allreduce_scenarios(int ranks, int count, int vec_len,
                                                        std::uint64_t seed);

// The built-in desk-scale suite: families, items and the L1-L4 task graph
// over the deterministic worker kernels.
struct ToySuite {
    Registry registry;
    TaskGraph graph;
};

ToySuite toy_kernel_suite();

// Default (g, f, tau) bands for the toy registry in ratio space.
ThresholdManifest default_toy_manifest(const Registry& registry);

// Fixed synthetic workloads, generated once per seed and shipped with the
// registry.
std::map<std::string, CaptureBundle> make_standard_bundles(const Registry& registry,
                                                           std::uint64_t seed = 42);
CaptureBundle make_standard_bundle(const BenchmarkItem& item, std::uint64_t seed = 42);

// Downstream toy quality in [0,1] for cliff calibration: per-row argmax
// agreement for numeric outputs, top-1 agreement for rankings.
double downstream_quality(const OutputPayload& cand, const OutputPayload& ref);

// Runs noise-perturbed candidates across the amplitude grid and assembles a
// (discrepancy, quality) cliff curve for the item.
CliffCurve generate_cliff_curve(const BenchmarkItem& item, const Registry& registry,
                                const CaptureBundle& bundle,
                                const std::vector<double>& amplitudes,
                                const TimingProtocol& protocol, const HarnessOptions& opts = {});

// Reference outputs per scenario, one run of the item's reference runner.
std::map<std::string, OutputPayload> reference_outputs(const BenchmarkItem& item,
                                                       const CaptureBundle& bundle,
                                                       const TimingProtocol& protocol,
                                                       const HarnessOptions& opts = {});

// Toy gate logits for the routing analytics: "random-tensor",
// "random-tokens" or "captured".
OutputPayload toy_gate_logits(const std::string& source, int tokens, int experts,
                              std::uint64_t seed);

}  // namespace fk
