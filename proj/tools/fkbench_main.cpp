// SPDX-License-Identifier: Apache-2.0
//
// fkbench: batch evaluation CLI. Subcommands cover calibration, scoring,
// sensitivity sweeps, bootstrap CIs, harness-gap accounting, leaderboards,
// the three benchmarking tiers, capture/replay, the simulated all-reduce
// check and routing analytics.
//
// Exit codes: 0 success; 1 evaluation found failing kernels (still a
// successful evaluation); 2 usage or input error; 3 internal or reference
// failure.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fk/calibration.hpp"
#include "fk/harness.hpp"
#include "fk/records.hpp"
#include "fk/report.hpp"
#include "fk/routing.hpp"
#include "fk/scoring.hpp"
#include "fk/stats.hpp"
#include "fk/subprocess.hpp"

namespace {

using namespace fk;

struct CommonFlags {
    std::string input;
    std::string manifest;
    std::string out;
    std::string registry;
    std::optional<long long> seed;
    std::string format = "table";
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--input", flags.input, "Input file");
    cmd->add_option("--manifest", flags.manifest, "Threshold manifest (fk-manifest/1)");
    cmd->add_option("--out", flags.out, "Output file (default: stdout)");
    cmd->add_option("--registry", flags.registry,
                    "Registry records file (default: built-in suite)");
    cmd->add_option("--seed", flags.seed, "Seed (falls back to FK_SEED, then 42)");
    cmd->add_option("--format", flags.format, "Output format: table or records")
        ->check(CLI::IsMember({"table", "records"}));
}

std::uint64_t effective_seed(const CommonFlags& flags) {
    if (flags.seed) return static_cast<std::uint64_t>(*flags.seed);
    if (const char* env = std::getenv("FK_SEED"); env && *env)
        return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
    return 42;
}

void write_output(const CommonFlags& flags, const std::string& contents) {
    if (flags.out.empty())
        std::cout << contents;
    else
        write_file(flags.out, contents);
}

Registry load_registry(const CommonFlags& flags) {
    if (flags.registry.empty()) return toy_kernel_suite().registry;
    std::ifstream in(flags.registry);
    require(in.good(), Errc::io_error, "cannot open " + flags.registry);
    return parse_registry(in);
}

ThresholdManifest load_manifest(const CommonFlags& flags, const Registry& registry) {
    if (flags.manifest.empty()) return default_toy_manifest(registry);
    std::ifstream in(flags.manifest);
    require(in.good(), Errc::io_error, "cannot open " + flags.manifest);
    return parse_manifest(in);
}

std::vector<RunRecord> load_runs(const std::string& path) {
    require(!path.empty(), Errc::usage_error, "--input is required");
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    return parse_run_records(in);
}

WorkerProgram make_candidate(const std::string& locator, double timeout_s,
                             const std::map<std::string, std::string>& bindings) {
    WorkerProgram c;
    c.locator = locator;
    c.role = WorkerProgram::Role::Candidate;
    c.timeout_s = timeout_s;
    c.bindings = bindings;
    c.validate();
    return c;
}

std::map<std::string, std::string> parse_bindings(const std::vector<std::string>& kvs) {
    std::map<std::string, std::string> out;
    for (const auto& kv : kvs) {
        auto eq = kv.find('=');
        require(eq != std::string::npos, Errc::usage_error,
                "binding must look like slot=locator: " + kv);
        out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const CommonFlags& flags, const std::vector<double>& amplitudes) {
    ToySuite suite = toy_kernel_suite();
    auto bundles = make_standard_bundles(suite.registry, effective_seed(flags));
    TimingProtocol protocol;
    protocol.warmup_iters = 2;  // calibration needs outputs, not clean timings
    protocol.timed_runs = 1;

    std::map<std::string, ThresholdInput> per_item;
    for (const auto& [item_id, item] : suite.registry.items()) {
        const FamilySpec& family = suite.registry.family(item.family_id);
        DtypeTolerance tol = lookup_tolerance(default_dtype_table(), item.dtype);

        double g = 0.0;
        if (family.discrepancy_kind == DiscrepancyKind::ElementwiseNumeric) {
            // Two reference runs; deterministic workers collapse to the band floor.
            auto rep_a = reference_outputs(item, bundles.at(item_id), protocol);
            auto rep_b = reference_outputs(item, bundles.at(item_id), protocol);
            for (const auto& sid : item.scenario_ids)
                g = std::max(g, calibrate_g(item, {rep_a.at(sid), rep_b.at(sid)}, tol));
        }

        try {
            CliffCurve curve = generate_cliff_curve(item, suite.registry, bundles.at(item_id),
                                                    amplitudes, protocol);
            double f = calibrate_f(curve, g);
            per_item[item_id] = {g, f, family.default_validity_threshold};
        } catch (const Error& e) {
            fail(e.code(), std::string("calibrating ") + item_id + ": " + e.what());
        }
    }
    ThresholdManifest manifest = freeze_manifest(per_item, default_dtype_table());
    write_output(flags, serialize_manifest(manifest));
    return 0;
}

int cmd_score(const CommonFlags& flags, bool with_ci) {
    Registry registry = load_registry(flags);
    ThresholdManifest manifest = load_manifest(flags, registry);
    auto records = load_runs(flags.input);
    ScoreCard card = build_scorecard(records, registry, manifest);
    if (with_ci) {
        auto by_family = score_items_by_family(records, registry, manifest, {0.0, 0.5, 1.0});
        BootstrapConfig cfg;
        cfg.seed = static_cast<std::uint32_t>(effective_seed(flags));
        std::map<std::string, std::pair<double, double>> cis;
        for (const auto& [family, items] : by_family) {
            std::vector<double> s;
            for (const auto& it : items)
                if (it.valid) s.push_back(it.s_blend.at(0.5));
            if (s.empty()) continue;
            BootstrapInterval ci = bootstrap_ci(s, cfg);
            cis[family] = {ci.lo, ci.hi};
        }
        if (!cis.empty()) card.ci_by_family = std::move(cis);
    }
    if (flags.format == "table")
        write_output(flags, emit_leaderboard({card}));
    else
        write_output(flags, serialize_scorecard(card));
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<double>& scales) {
    Registry registry = load_registry(flags);
    ThresholdManifest manifest = load_manifest(flags, registry);
    auto records = load_runs(flags.input);
    auto rows = sensitivity_sweep(records, registry, manifest, scales);
    write_output(flags, emit_sweep_table(rows));
    return 0;
}

int cmd_bootstrap(const CommonFlags& flags, int replicates, double level, int workers) {
    require(!flags.input.empty(), Errc::usage_error, "--input is required");
    // Input: one positive speedup per line.
    std::ifstream in(flags.input);
    require(in.good(), Errc::io_error, "cannot open " + flags.input);
    std::vector<double> speedups;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        speedups.push_back(std::stod(line));
    }
    BootstrapConfig cfg;
    cfg.replicates = replicates;
    cfg.level = level;
    cfg.seed = static_cast<std::uint32_t>(effective_seed(flags));
    BootstrapInterval ci = bootstrap_ci(speedups, cfg, workers);
    write_output(flags, emit_bootstrap_line(ci, speedups.size()));
    return 0;
}

int cmd_gap(const CommonFlags& flags, double imputed) {
    Registry registry = load_registry(flags);
    ThresholdManifest manifest = load_manifest(flags, registry);
    auto records = load_runs(flags.input);
    auto by_family = score_items_by_family(records, registry, manifest, {0.0, 0.5, 1.0});
    std::vector<ItemScore> items;
    for (const auto& [family, scores] : by_family)
        items.insert(items.end(), scores.begin(), scores.end());
    std::vector<GapResult> results = {
        harness_gap(items, GapPolicy::AttemptedOnly, imputed),
        harness_gap(items, GapPolicy::Default, imputed),
        harness_gap(items, GapPolicy::Punitive, imputed),
    };
    write_output(flags, emit_gap_table(results));
    return 0;
}

int cmd_leaderboard(const CommonFlags& flags, const std::vector<std::string>& inputs) {
    std::vector<std::string> files = inputs;
    if (!flags.input.empty()) files.push_back(flags.input);
    require(!files.empty(), Errc::usage_error, "at least one scorecard input is required");
    std::vector<ScoreCard> cards;
    for (const auto& f : files) {
        std::ifstream in(f);
        require(in.good(), Errc::io_error, "cannot open " + f);
        cards.push_back(parse_scorecard(in));
    }
    write_output(flags, emit_leaderboard(std::move(cards)));
    return 0;
}

int cmd_run_tier1(const CommonFlags& flags, const std::string& item_id,
                  const std::string& candidate_locator,
                  const std::vector<std::string>& binding_kvs, double timeout_s,
                  const std::string& agent, const std::string& bundle_path) {
    Registry registry = load_registry(flags);
    const BenchmarkItem& item = registry.item(item_id);
    CaptureBundle bundle;
    if (bundle_path.empty()) {
        bundle = make_standard_bundle(item, effective_seed(flags));
    } else {
        std::ifstream in(bundle_path);
        require(in.good(), Errc::io_error, "cannot open " + bundle_path);
        bundle = parse_capture(in);
    }
    WorkerProgram candidate =
        make_candidate(candidate_locator, timeout_s, parse_bindings(binding_kvs));
    HarnessOptions opts;
    opts.agent_id = agent;
    RunRecord rec = run_pair(item, candidate, bundle, TimingProtocol{}, opts);
    ThresholdManifest manifest = load_manifest(flags, registry);
    compute_discrepancies(rec, registry, manifest.dtype_table());
    write_output(flags, serialize_run_records({rec}));
    return rec.status == RunStatus::Ok ? 0 : 1;
}

int cmd_run_tier2(const CommonFlags& flags, const std::string& task_id,
                  const std::string& capture_dir) {
    ToySuite suite = toy_kernel_suite();
    Registry& registry = suite.registry;
    const TaskNode& node = suite.graph.node(task_id);
    CaptureBundle workload =
        make_standard_bundle(registry.item(node.item_id), effective_seed(flags));
    E2EResult result = run_e2e(suite.graph, registry, task_id, workload, TimingProtocol{});

    std::string table = "scenario,throughput,latency_s\n";
    for (const auto& m : result.measurements)
        table += m.scenario_id + "," + fmt3(m.throughput) + "," + fmt3(m.latency_s) + "\n";
    write_output(flags, table);

    if (!capture_dir.empty()) {
        for (const auto& b : result.bundles)
            write_file(capture_dir + "/" + b.bundle_id + ".fkc", serialize_capture(b));
    }
    return 0;
}

int cmd_run_tier3(const CommonFlags& flags, const std::string& agents_path,
                  const std::string& out_dir) {
    require(!agents_path.empty(), Errc::usage_error, "--agents is required");
    ToySuite suite = toy_kernel_suite();
    Registry& registry = suite.registry;
    ThresholdManifest manifest = load_manifest(flags, registry);

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(agents_path));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, std::string("bad agents file: ") + e.what());
    }
    std::map<std::string, AgentBindings> agents;
    for (const auto& [agent, items] : doc.at("agents").items()) {
        for (const auto& [item_id, spec] : items.items()) {
            WorkerProgram c;
            if (spec.is_string()) {
                c = make_candidate(spec.get<std::string>(), 60.0, {});
            } else {
                c = make_candidate(
                    spec.at("locator").get<std::string>(),
                    spec.value("timeout_s", 60.0),
                    spec.value("bindings", std::map<std::string, std::string>{}));
            }
            agents[agent][item_id] = std::move(c);
        }
    }

    auto bundles = make_standard_bundles(registry, effective_seed(flags));
    auto cards = run_eval_sweep(agents, registry, manifest, bundles, TimingProtocol{});

    std::vector<ScoreCard> all;
    bool failures = false;
    for (const auto& [agent, card] : cards) {
        all.push_back(card);
        if (card.coverage_item < 1.0) failures = true;
        if (!out_dir.empty())
            write_file(out_dir + "/" + agent + ".fks", serialize_scorecard(card));
    }
    write_output(flags, emit_leaderboard(all));
    return failures ? 1 : 0;
}

int cmd_capture(const CommonFlags& flags, const std::string& task_id,
                const std::string& out_dir) {
    require(!out_dir.empty(), Errc::usage_error, "--out-dir is required");
    return cmd_run_tier2(flags, task_id, out_dir);
}

int cmd_replay(const CommonFlags& flags, const std::string& candidate_locator, double timeout_s,
               const std::string& agent) {
    require(!flags.input.empty(), Errc::usage_error, "--input bundle is required");
    Registry registry = load_registry(flags);
    std::ifstream in(flags.input);
    require(in.good(), Errc::io_error, "cannot open " + flags.input);
    CaptureBundle bundle = parse_capture(in);
    const BenchmarkItem& item = registry.item(bundle.item_id);
    std::string locator = candidate_locator.empty() ? item.reference_runner : candidate_locator;
    WorkerProgram candidate = make_candidate(locator, timeout_s, {});
    HarnessOptions opts;
    opts.agent_id = agent;
    RunRecord rec = run_pair(item, candidate, bundle, TimingProtocol{}, opts);
    ThresholdManifest manifest = load_manifest(flags, registry);
    compute_discrepancies(rec, registry, manifest.dtype_table());
    write_output(flags, serialize_run_records({rec}));
    return rec.status == RunStatus::Ok ? 0 : 1;
}

int cmd_allreduce_check(const CommonFlags& flags, const std::string& candidate_locator,
                        int ranks, int scenario_count, int vec_len, double band_g) {
    WorkerProgram candidate = make_candidate(candidate_locator, 60.0, {});
    auto scenarios = make_allreduce_scenarios(ranks, scenario_count, vec_len,
                                              effective_seed(flags));
    auto outcomes = allreduce_check(candidate, ranks, scenarios, band_g);
    std::string table = "scenario,pass,worst_d\n";
    bool failures = false;
    for (const auto& o : outcomes) {
        double worst = 0.0;
        for (const auto& r : o.ranks) worst = std::max(worst, r.d);
        table += o.scenario_id + "," + (o.pass ? "pass" : "fail") + "," + fmt3(worst) + "\n";
        if (!o.pass) failures = true;
    }
    write_output(flags, table);
    return failures ? 1 : 0;
}

int cmd_routing(const CommonFlags& flags, int tokens, int experts, int k, int top) {
    std::uint64_t seed = effective_seed(flags);
    std::vector<RoutingSummaryRow> rows;
    std::map<std::string, ExpertLoad> loads;
    std::string records_out;
    for (const std::string source : {"random-tensor", "random-tokens", "captured"}) {
        OutputPayload logits = toy_gate_logits(source, tokens, experts, seed);
        ExpertLoad load = expert_load(logits, k, source);
        records_out += expert_load_record_line(load) + "\n";
        loads.emplace(source, load);
        rows.push_back({source, gini(load), hot_experts(load, top)});
    }
    if (flags.format == "records") {
        write_output(flags, records_out);
        return 0;
    }
    std::string out = emit_routing_table(rows);
    auto overlap = hot_expert_overlap(loads.at("random-tokens"), loads.at("captured"), top);
    out += "overlap,random-tokens/captured," + std::to_string(overlap.shared) + "/" +
           std::to_string(top) + "\n";
    write_output(flags, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale kernel benchmark evaluation engine"};
    app.require_subcommand(1);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Derive and freeze a threshold manifest");
    std::vector<double> amplitudes = {0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2,
                                      3e-2, 0.1, 0.3,  1.0,  3.0,  10.0};
    CommonFlags calibrate_flags;
    add_common(calibrate, calibrate_flags);
    calibrate->add_option("--amplitudes", amplitudes, "Noise amplitudes for cliff fitting");

    // score
    auto* score = app.add_subcommand("score", "Score run records into a scorecard");
    CommonFlags score_flags;
    bool with_ci = false;
    add_common(score, score_flags);
    score->add_flag("--ci", with_ci, "Attach per-family bootstrap CIs");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Tolerance sensitivity sweep");
    CommonFlags sweep_flags;
    std::vector<double> scales = {0.25, 0.5, 1.0, 2.0, 5.0};
    add_common(sweep, sweep_flags);
    sweep->add_option("--scales", scales, "Threshold scales")->delimiter(',');

    // bootstrap
    auto* bootstrap = app.add_subcommand("bootstrap", "Bootstrap CI over speedups");
    CommonFlags bootstrap_flags;
    int replicates = 10000, workers = 1;
    double level = 0.95;
    add_common(bootstrap, bootstrap_flags);
    bootstrap->add_option("--replicates", replicates, "Bootstrap replicates");
    bootstrap->add_option("--level", level, "Confidence level");
    bootstrap->add_option("--workers", workers, "Worker threads (result-invariant)");

    // gap
    auto* gap = app.add_subcommand("gap", "Harness-gap accounting under all policies");
    CommonFlags gap_flags;
    double imputed = 0.01;
    add_common(gap, gap_flags);
    gap->add_option("--imputed", imputed, "Imputed speedup for the punitive policy");

    // leaderboard
    auto* leaderboard = app.add_subcommand("leaderboard", "Rank scorecards");
    CommonFlags leaderboard_flags;
    std::vector<std::string> lb_inputs;
    add_common(leaderboard, leaderboard_flags);
    leaderboard->add_option("cards", lb_inputs, "Scorecard files");

    // run-tier1
    auto* tier1 = app.add_subcommand("run-tier1", "Kernel pair run (reference vs candidate)");
    CommonFlags tier1_flags;
    std::string t1_item, t1_candidate, t1_agent = "agent", t1_bundle;
    std::vector<std::string> t1_bindings;
    double t1_timeout = 60.0;
    add_common(tier1, tier1_flags);
    tier1->add_option("--item", t1_item, "Benchmark item id")->required();
    tier1->add_option("--candidate", t1_candidate, "Candidate locator")->required();
    tier1->add_option("--bindings", t1_bindings, "Sub-kernel bindings slot=locator")
        ->delimiter(',');
    tier1->add_option("--timeout", t1_timeout, "Per-scenario timeout seconds");
    tier1->add_option("--agent", t1_agent, "Agent id for the record");
    tier1->add_option("--bundle", t1_bundle, "Capture bundle to replay (default: standard)");

    // run-tier2
    auto* tier2 = app.add_subcommand("run-tier2", "End-to-end pipeline run with capture");
    CommonFlags tier2_flags;
    std::string t2_task = "pipeline", t2_dir;
    add_common(tier2, tier2_flags);
    tier2->add_option("--task", t2_task, "L4 task id");
    tier2->add_option("--out-dir", t2_dir, "Directory for captured bundles");

    // run-tier3
    auto* tier3 = app.add_subcommand("run-tier3", "Standardized evaluation sweep");
    CommonFlags tier3_flags;
    std::string t3_agents, t3_dir;
    add_common(tier3, tier3_flags);
    tier3->add_option("--agents", t3_agents, "Agents JSON file")->required();
    tier3->add_option("--out-dir", t3_dir, "Directory for per-agent scorecards");

    // capture
    auto* capture = app.add_subcommand("capture", "Capture golden inputs from an e2e run");
    CommonFlags capture_flags;
    std::string cap_task = "pipeline", cap_dir;
    add_common(capture, capture_flags);
    capture->add_option("--task", cap_task, "L4 task id");
    capture->add_option("--out-dir", cap_dir, "Directory for captured bundles")->required();

    // replay
    auto* replay = app.add_subcommand("replay", "Replay a capture bundle through a pair run");
    CommonFlags replay_flags;
    std::string rp_candidate, rp_agent = "agent";
    double rp_timeout = 60.0;
    add_common(replay, replay_flags);
    replay->add_option("--candidate", rp_candidate,
                       "Candidate locator (default: the item's reference)");
    replay->add_option("--timeout", rp_timeout, "Per-scenario timeout seconds");
    replay->add_option("--agent", rp_agent, "Agent id for the record");

    // allreduce-check
    auto* allreduce = app.add_subcommand("allreduce-check", "Simulated multi-rank all-reduce");
    CommonFlags ar_flags;
    std::string ar_candidate = "builtin:allreduce_ring";
    int ar_ranks = 4, ar_scenarios = 20, ar_len = 64;
    double ar_band = 1.0;
    add_common(allreduce, ar_flags);
    allreduce->add_option("--candidate", ar_candidate, "Collective candidate locator");
    allreduce->add_option("--ranks", ar_ranks, "Rank count");
    allreduce->add_option("--scenarios", ar_scenarios, "Scenario count");
    allreduce->add_option("--len", ar_len, "Vector length per rank");
    allreduce->add_option("--band", ar_band, "Error-ratio band for a pass");

    // routing
    auto* routing = app.add_subcommand("routing", "Expert-load analytics on toy gates");
    CommonFlags routing_flags;
    int rt_tokens = 4096, rt_experts = 128, rt_k = 8, rt_top = 16;
    add_common(routing, routing_flags);
    routing->add_option("--tokens", rt_tokens, "Token count");
    routing->add_option("--experts", rt_experts, "Expert count");
    routing->add_option("--k", rt_k, "Top-k routing");
    routing->add_option("--top", rt_top, "Hot-expert set size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (calibrate->parsed()) return cmd_calibrate(calibrate_flags, amplitudes);
        if (score->parsed()) return cmd_score(score_flags, with_ci);
        if (sweep->parsed()) return cmd_sweep(sweep_flags, scales);
        if (bootstrap->parsed()) return cmd_bootstrap(bootstrap_flags, replicates, level, workers);
        if (gap->parsed()) return cmd_gap(gap_flags, imputed);
        if (leaderboard->parsed()) return cmd_leaderboard(leaderboard_flags, lb_inputs);
        if (tier1->parsed())
            return cmd_run_tier1(tier1_flags, t1_item, t1_candidate, t1_bindings, t1_timeout,
                                 t1_agent, t1_bundle);
        if (tier2->parsed()) return cmd_run_tier2(tier2_flags, t2_task, t2_dir);
        if (tier3->parsed()) return cmd_run_tier3(tier3_flags, t3_agents, t3_dir);
        if (capture->parsed()) return cmd_capture(capture_flags, cap_task, cap_dir);
        if (replay->parsed()) return cmd_replay(replay_flags, rp_candidate, rp_timeout, rp_agent);
        if (allreduce->parsed())
            return cmd_allreduce_check(ar_flags, ar_candidate, ar_ranks, ar_scenarios, ar_len,
                                       ar_band);
        if (routing->parsed()) return cmd_routing(routing_flags, rt_tokens, rt_experts, rt_k,
                                                  rt_top);
        std::cerr << "unknown subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case Errc::reference_failure:
            case Errc::rank_spawn_failure:
            case Errc::channel_timeout:
                return 3;
            default:
                return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
