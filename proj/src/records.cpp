// SPDX-License-Identifier: Apache-2.0
#include "fk/records.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fk {

using nlohmann::json;

const char* to_string(CaptureSource s) {
    return s == CaptureSource::EndToEndRun ? "end-to-end-run" : "synthetic";
}

CaptureSource capture_source_from_string(const std::string& s) {
    if (s == "end-to-end-run") return CaptureSource::EndToEndRun;
    if (s == "synthetic") return CaptureSource::Synthetic;
    fail(Errc::parse_error, "unknown capture source '" + s + "'");
}

void CaptureBundle::validate() const {
    require(!bundle_id.empty() && !item_id.empty(), Errc::invalid_value,
            "bundle_id and item_id must be nonempty");
    for (const auto& s : scenarios) {
        require(!s.scenario_id.empty(), Errc::invalid_value, "scenario_id must be nonempty");
        for (const auto& p : s.inputs) p.validate();
    }
}

json real_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double real_from_json(const json& j) {
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        fail(Errc::parse_error, "bad real literal '" + s + "'");
    }
    require(j.is_number(), Errc::parse_error, "expected a number");
    return j.get<double>();
}

namespace {

json reals_to_json(const std::vector<double>& vs) {
    json a = json::array();
    for (double v : vs) a.push_back(real_to_json(v));
    return a;
}

std::vector<double> reals_from_json(const json& j) {
    require(j.is_array(), Errc::parse_error, "expected an array of reals");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(real_from_json(e));
    return out;
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    require(it != j.end(), Errc::parse_error, std::string("missing field '") + name + "'");
    return *it;
}

}  // namespace

json to_json(const OutputPayload& p) {
    return {{"kind", to_string(p.kind)}, {"shape", p.shape}, {"values", reals_to_json(p.values)}};
}

OutputPayload payload_from_json(const json& j) {
    OutputPayload p;
    p.kind = payload_kind_from_string(field(j, "kind").get<std::string>());
    p.shape = field(j, "shape").get<std::vector<std::int64_t>>();
    p.values = reals_from_json(field(j, "values"));
    p.validate();
    return p;
}

json to_json(const FamilySpec& f) {
    return {{"family_id", f.family_id},
            {"discrepancy_kind", to_string(f.discrepancy_kind)},
            {"default_fail_threshold", f.default_fail_threshold},
            {"default_validity_threshold", f.default_validity_threshold}};
}

FamilySpec family_from_json(const json& j) {
    FamilySpec f;
    f.family_id = field(j, "family_id").get<std::string>();
    f.discrepancy_kind =
        discrepancy_kind_from_string(field(j, "discrepancy_kind").get<std::string>());
    f.default_fail_threshold = field(j, "default_fail_threshold").get<double>();
    f.default_validity_threshold = field(j, "default_validity_threshold").get<double>();
    f.validate();
    return f;
}

json to_json(const DtypeTolerance& t) {
    return {{"dtype", to_string(t.dtype)}, {"atol", t.atol}, {"rtol", t.rtol}};
}

DtypeTolerance tolerance_from_json(const json& j) {
    DtypeTolerance t;
    t.dtype = dtype_from_string(field(j, "dtype").get<std::string>());
    t.atol = field(j, "atol").get<double>();
    t.rtol = field(j, "rtol").get<double>();
    t.validate();
    return t;
}

json to_json(const BenchmarkItem& i) {
    return {{"item_id", i.item_id},
            {"family_id", i.family_id},
            {"level", i.level},
            {"dtype", to_string(i.dtype)},
            {"scenario_ids", i.scenario_ids},
            {"reference_runner", i.reference_runner}};
}

BenchmarkItem item_from_json(const json& j) {
    BenchmarkItem i;
    i.item_id = field(j, "item_id").get<std::string>();
    i.family_id = field(j, "family_id").get<std::string>();
    i.level = field(j, "level").get<int>();
    i.dtype = dtype_from_string(field(j, "dtype").get<std::string>());
    i.scenario_ids = field(j, "scenario_ids").get<std::vector<std::string>>();
    i.reference_runner = field(j, "reference_runner").get<std::string>();
    i.validate();
    return i;
}

json to_json(const ScenarioResult& s) {
    json j = {{"scenario_id", s.scenario_id},
              {"ref_output", to_json(s.ref_output)},
              {"cand_output", to_json(s.cand_output)},
              {"ref_runtime_s", s.ref_runtime_s},
              {"cand_runtime_s", s.cand_runtime_s},
              {"ref_throughput", s.ref_throughput},
              {"cand_throughput", s.cand_throughput},
              {"ref_latency_s", s.ref_latency_s},
              {"cand_latency_s", s.cand_latency_s}};
    if (s.discrepancy) j["discrepancy"] = real_to_json(*s.discrepancy);
    return j;
}

ScenarioResult scenario_from_json(const json& j) {
    ScenarioResult s;
    s.scenario_id = field(j, "scenario_id").get<std::string>();
    s.ref_output = payload_from_json(field(j, "ref_output"));
    s.cand_output = payload_from_json(field(j, "cand_output"));
    s.ref_runtime_s = field(j, "ref_runtime_s").get<double>();
    s.cand_runtime_s = field(j, "cand_runtime_s").get<double>();
    s.ref_throughput = field(j, "ref_throughput").get<double>();
    s.cand_throughput = field(j, "cand_throughput").get<double>();
    s.ref_latency_s = field(j, "ref_latency_s").get<double>();
    s.cand_latency_s = field(j, "cand_latency_s").get<double>();
    if (j.contains("discrepancy")) s.discrepancy = real_from_json(j["discrepancy"]);
    s.validate();
    return s;
}

json to_json(const RunRecord& r) {
    json scen = json::array();
    for (const auto& s : r.scenarios) scen.push_back(to_json(s));
    json j = {{"agent_id", r.agent_id},
              {"item_id", r.item_id},
              {"status", to_string(r.status)},
              {"scenarios", std::move(scen)}};
    if (r.profile_attachment) j["profile_attachment"] = *r.profile_attachment;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.agent_id = field(j, "agent_id").get<std::string>();
    r.item_id = field(j, "item_id").get<std::string>();
    r.status = run_status_from_string(field(j, "status").get<std::string>());
    for (const auto& e : field(j, "scenarios")) r.scenarios.push_back(scenario_from_json(e));
    if (j.contains("profile_attachment"))
        r.profile_attachment = j["profile_attachment"].get<std::string>();
    r.validate();
    return r;
}

json to_json(const CaptureBundle& b) {
    json scen = json::array();
    for (const auto& s : b.scenarios) {
        json inputs = json::array();
        for (const auto& p : s.inputs) inputs.push_back(to_json(p));
        scen.push_back({{"scenario_id", s.scenario_id}, {"inputs", std::move(inputs)}});
    }
    return {{"version", kCaptureVersion}, {"bundle_id", b.bundle_id},
            {"item_id", b.item_id},      {"scenarios", std::move(scen)},
            {"source", to_string(b.source)}, {"seed", b.seed}};
}

CaptureBundle capture_from_json(const json& j) {
    require(field(j, "version").get<std::string>() == kCaptureVersion, Errc::parse_error,
            "expected version " + std::string(kCaptureVersion));
    CaptureBundle b;
    b.bundle_id = field(j, "bundle_id").get<std::string>();
    b.item_id = field(j, "item_id").get<std::string>();
    b.source = capture_source_from_string(field(j, "source").get<std::string>());
    b.seed = field(j, "seed").get<std::int64_t>();
    for (const auto& e : field(j, "scenarios")) {
        CaptureScenario s;
        s.scenario_id = field(e, "scenario_id").get<std::string>();
        for (const auto& p : field(e, "inputs")) s.inputs.push_back(payload_from_json(p));
        b.scenarios.push_back(std::move(s));
    }
    b.validate();
    return b;
}

json to_json(const ScoreCard& c) {
    json lambdas = json::array();
    for (const auto& [lam, s] : c.s_macro_by_lambda) lambdas.push_back({lam, s});
    json fam = json::object();
    for (const auto& [id, fs] : c.per_family) {
        json e = {{"c_f", fs.c_f},
                  {"coverage_f", fs.coverage_f},
                  {"valid_count", fs.valid_count},
                  {"item_count", fs.item_count}};
        if (fs.s_f) e["s_f"] = *fs.s_f;
        fam[id] = std::move(e);
    }
    json j = {{"version", kScorecardVersion},
              {"agent_id", c.agent_id},
              {"c_macro", c.c_macro},
              {"coverage_item", c.coverage_item},
              {"coverage_macro", c.coverage_macro},
              {"coverage_attempted", c.coverage_attempted},
              {"s_macro_by_lambda", std::move(lambdas)},
              {"score_default", c.score_default},
              {"per_family", std::move(fam)},
              {"valid_families", c.valid_families},
              {"fast_at_1", c.fast_at_1},
              {"fast_at_1_5", c.fast_at_1_5}};
    if (c.ci_by_family) {
        json ci = json::object();
        for (const auto& [id, lohi] : *c.ci_by_family) ci[id] = {lohi.first, lohi.second};
        j["ci_by_family"] = std::move(ci);
    }
    return j;
}

ScoreCard scorecard_from_json(const json& j) {
    require(field(j, "version").get<std::string>() == kScorecardVersion, Errc::parse_error,
            "expected version " + std::string(kScorecardVersion));
    ScoreCard c;
    c.agent_id = field(j, "agent_id").get<std::string>();
    c.c_macro = field(j, "c_macro").get<double>();
    c.coverage_item = field(j, "coverage_item").get<double>();
    c.coverage_macro = field(j, "coverage_macro").get<double>();
    c.coverage_attempted = field(j, "coverage_attempted").get<double>();
    for (const auto& e : field(j, "s_macro_by_lambda"))
        c.s_macro_by_lambda[e.at(0).get<double>()] = e.at(1).get<double>();
    c.score_default = field(j, "score_default").get<double>();
    for (const auto& [id, e] : field(j, "per_family").items()) {
        FamilyScore fs;
        fs.c_f = field(e, "c_f").get<double>();
        fs.coverage_f = field(e, "coverage_f").get<double>();
        fs.valid_count = field(e, "valid_count").get<int>();
        fs.item_count = field(e, "item_count").get<int>();
        if (e.contains("s_f")) fs.s_f = e["s_f"].get<double>();
        c.per_family[id] = fs;
    }
    c.valid_families = field(j, "valid_families").get<std::set<std::string>>();
    c.fast_at_1 = field(j, "fast_at_1").get<int>();
    c.fast_at_1_5 = field(j, "fast_at_1_5").get<int>();
    if (j.contains("ci_by_family")) {
        std::map<std::string, std::pair<double, double>> ci;
        for (const auto& [id, e] : j["ci_by_family"].items())
            ci[id] = {e.at(0).get<double>(), e.at(1).get<double>()};
        c.ci_by_family = std::move(ci);
    }
    return c;
}

json manifest_to_json(const ThresholdManifest& m) {
    json per_item = json::object();
    for (const auto& [id, e] : m.per_item())
        per_item[id] = {{"g", e.g}, {"f", e.f}, {"tau", e.tau}};
    json table = json::array();
    for (const auto& t : m.dtype_table()) table.push_back(to_json(t));
    return {{"version", kManifestVersion},
            {"per_item", std::move(per_item)},
            {"dtype_table", std::move(table)},
            {"frozen", m.frozen()},
            {"tolerance_scale", m.tolerance_scale()}};
}

ThresholdManifest manifest_from_json(const json& j) {
    require(field(j, "version").get<std::string>() == kManifestVersion, Errc::parse_error,
            "expected version " + std::string(kManifestVersion));
    std::map<std::string, ThresholdEntry> per_item;
    for (const auto& [id, e] : field(j, "per_item").items()) {
        ThresholdEntry t;
        t.g = field(e, "g").get<double>();
        t.f = field(e, "f").get<double>();
        t.tau = field(e, "tau").get<double>();
        per_item[id] = t;
    }
    std::vector<DtypeTolerance> table;
    for (const auto& e : field(j, "dtype_table")) table.push_back(tolerance_from_json(e));
    return ThresholdManifest(std::move(per_item), std::move(table),
                             field(j, "frozen").get<bool>(),
                             field(j, "tolerance_scale").get<double>());
}

// ---------------------------------------------------------------------------
// Line-delimited records

std::string record_line(const std::string& type, json fields) {
    fields["version"] = kRecordsVersion;
    fields["type"] = type;
    return fields.dump();
}

std::pair<std::string, json> parse_record_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("bad record line: ") + e.what());
    }
    require(field(j, "version").get<std::string>() == kRecordsVersion, Errc::parse_error,
            "expected version " + std::string(kRecordsVersion));
    std::string type = field(j, "type").get<std::string>();
    return {std::move(type), std::move(j)};
}

std::string serialize_registry(const Registry& reg) {
    std::string out;
    for (const auto& [id, f] : reg.families()) out += record_line("family", to_json(f)) + "\n";
    for (const auto& [id, i] : reg.items()) out += record_line("item", to_json(i)) + "\n";
    return out;
}

Registry parse_registry(std::istream& in) {
    std::vector<FamilySpec> families;
    std::vector<BenchmarkItem> items;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto [type, j] = parse_record_line(line);
        if (type == "family")
            families.push_back(family_from_json(j));
        else if (type == "item")
            items.push_back(item_from_json(j));
        else
            fail(Errc::parse_error, "unexpected record type '" + type + "' in registry");
    }
    return validate_registry(families, items);
}

std::string serialize_run_records(const std::vector<RunRecord>& records) {
    std::string out;
    for (const auto& r : records) out += record_line("run_record", to_json(r)) + "\n";
    return out;
}

std::vector<RunRecord> parse_run_records(std::istream& in) {
    std::vector<RunRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto [type, j] = parse_record_line(line);
        require(type == "run_record", Errc::parse_error,
                "unexpected record type '" + type + "' in runs file");
        out.push_back(run_record_from_json(j));
    }
    return out;
}

namespace {

json parse_document(std::istream& in) {
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("bad document: ") + e.what());
    }
}

}  // namespace

std::string serialize_manifest(const ThresholdManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }
ThresholdManifest parse_manifest(std::istream& in) { return manifest_from_json(parse_document(in)); }

std::string serialize_capture(const CaptureBundle& b) { return to_json(b).dump() + "\n"; }
CaptureBundle parse_capture(std::istream& in) { return capture_from_json(parse_document(in)); }

std::string serialize_scorecard(const ScoreCard& c) { return to_json(c).dump(2) + "\n"; }
ScoreCard parse_scorecard(std::istream& in) { return scorecard_from_json(parse_document(in)); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), Errc::io_error, "cannot write " + path);
    out << contents;
    require(out.good(), Errc::io_error, "write failed for " + path);
}

}  // namespace fk
