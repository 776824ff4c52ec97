// SPDX-License-Identifier: Apache-2.0
#include "fk/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_set>

namespace fk {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::duplicate_id: return "duplicate-id";
        case Errc::dangling_family_reference: return "dangling-family-reference";
        case Errc::empty_scenario_list: return "empty-scenario-list";
        case Errc::invalid_value: return "invalid-value";
        case Errc::shape_mismatch: return "shape-mismatch";
        case Errc::non_finite_reference: return "non-finite-reference";
        case Errc::non_finite_input: return "non-finite-input";
        case Errc::empty_reference: return "empty-reference";
        case Errc::k_exceeds_length: return "k-exceeds-length";
        case Errc::kind_mismatch: return "kind-mismatch";
        case Errc::fewer_than_two_replicates: return "fewer-than-two-replicates";
        case Errc::degenerate_curve: return "degenerate-curve";
        case Errc::cliff_inside_band: return "cliff-inside-band";
        case Errc::band_violation: return "band-violation";
        case Errc::frozen_manifest: return "frozen-manifest";
        case Errc::unfrozen_manifest: return "unfrozen-manifest";
        case Errc::nonpositive_scale: return "nonpositive-scale";
        case Errc::missing_discrepancy: return "missing-discrepancy";
        case Errc::missing_threshold: return "missing-threshold";
        case Errc::empty_family: return "empty-family";
        case Errc::zero_or_negative_measurement: return "zero-or-negative-measurement";
        case Errc::mixed_agent_records: return "mixed-agent-records";
        case Errc::empty_input: return "empty-input";
        case Errc::nonpositive_speedup: return "nonpositive-speedup";
        case Errc::unknown_policy: return "unknown-policy";
        case Errc::level_violation: return "level-violation";
        case Errc::dangling_dependency: return "dangling-dependency";
        case Errc::unknown_task: return "unknown-task";
        case Errc::reference_failure: return "reference-failure";
        case Errc::composition_failure: return "composition-failure";
        case Errc::rank_spawn_failure: return "rank-spawn-failure";
        case Errc::channel_timeout: return "channel-timeout";
        case Errc::k_exceeds_experts: return "k-exceeds-experts";
        case Errc::expert_count_mismatch: return "expert-count-mismatch";
        case Errc::parse_error: return "parse-error";
        case Errc::io_error: return "io-error";
        case Errc::unknown_builtin: return "unknown-builtin";
        case Errc::usage_error: return "usage-error";
    }
    return "unknown-error";
}

const char* to_string(DiscrepancyKind k) {
    switch (k) {
        case DiscrepancyKind::ElementwiseNumeric: return "elementwise-numeric";
        case DiscrepancyKind::TokenSequence: return "token-sequence";
        case DiscrepancyKind::RankingTopK: return "ranking-topk";
        case DiscrepancyKind::ScalarMetric: return "scalar-metric";
    }
    return "?";
}

const char* to_string(Dtype d) {
    switch (d) {
        case Dtype::FP32: return "FP32";
        case Dtype::FP16: return "FP16";
        case Dtype::BF16: return "BF16";
        case Dtype::FP8E4M3: return "FP8-E4M3";
        case Dtype::FP8E5M2: return "FP8-E5M2";
    }
    return "?";
}

const char* to_string(PayloadKind k) {
    switch (k) {
        case PayloadKind::NumericTensor: return "numeric-tensor";
        case PayloadKind::TokenIds: return "token-ids";
        case PayloadKind::RankedIds: return "ranked-ids";
        case PayloadKind::Scalar: return "scalar";
    }
    return "?";
}

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Ok: return "ok";
        case RunStatus::Blocked: return "blocked";
        case RunStatus::Crash: return "crash";
        case RunStatus::Hang: return "hang";
        case RunStatus::ShapeError: return "shape-error";
        case RunStatus::IllegalMemory: return "illegal-memory";
        case RunStatus::Nan: return "nan";
        case RunStatus::TypeError: return "type-error";
    }
    return "?";
}

namespace {

template <typename E>
E enum_from_string(const std::string& s, std::initializer_list<E> all, const char* what) {
    for (E e : all)
        if (s == to_string(e)) return e;
    fail(Errc::parse_error, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

DiscrepancyKind discrepancy_kind_from_string(const std::string& s) {
    return enum_from_string(s,
                            {DiscrepancyKind::ElementwiseNumeric, DiscrepancyKind::TokenSequence,
                             DiscrepancyKind::RankingTopK, DiscrepancyKind::ScalarMetric},
                            "discrepancy kind");
}

Dtype dtype_from_string(const std::string& s) {
    return enum_from_string(
        s, {Dtype::FP32, Dtype::FP16, Dtype::BF16, Dtype::FP8E4M3, Dtype::FP8E5M2}, "dtype");
}

PayloadKind payload_kind_from_string(const std::string& s) {
    return enum_from_string(s,
                            {PayloadKind::NumericTensor, PayloadKind::TokenIds,
                             PayloadKind::RankedIds, PayloadKind::Scalar},
                            "payload kind");
}

RunStatus run_status_from_string(const std::string& s) {
    return enum_from_string(
        s,
        {RunStatus::Ok, RunStatus::Blocked, RunStatus::Crash, RunStatus::Hang,
         RunStatus::ShapeError, RunStatus::IllegalMemory, RunStatus::Nan, RunStatus::TypeError},
        "run status");
}

// ---------------------------------------------------------------------------

void FamilySpec::validate() const {
    require(!family_id.empty(), Errc::invalid_value, "family_id must be nonempty");
    require(default_fail_threshold >= 0.0 && std::isfinite(default_fail_threshold),
            Errc::invalid_value, "default_fail_threshold must be finite and >= 0");
    require(default_validity_threshold >= 0.0 && default_validity_threshold <= 1.0,
            Errc::invalid_value, "default_validity_threshold must be in [0,1]");
}

void DtypeTolerance::validate() const {
    require(atol >= 0.0 && std::isfinite(atol), Errc::invalid_value, "atol must be >= 0");
    require(rtol >= 0.0 && std::isfinite(rtol), Errc::invalid_value, "rtol must be >= 0");
    require(atol > 0.0 || rtol > 0.0, Errc::invalid_value, "atol and rtol must not both be zero");
}

std::vector<DtypeTolerance> default_dtype_table() {
    return {
        {Dtype::FP32, 1e-5, 1e-3},
        {Dtype::FP16, 1e-2, 1e-2},
        {Dtype::BF16, 1e-2, 1e-2},
        {Dtype::FP8E4M3, 0.125, 0.125},
        {Dtype::FP8E5M2, 0.125, 0.25},
    };
}

const DtypeTolerance& lookup_tolerance(const std::vector<DtypeTolerance>& table, Dtype d) {
    for (const auto& t : table)
        if (t.dtype == d) return t;
    fail(Errc::missing_threshold, std::string("no tolerance entry for dtype ") + to_string(d));
}

void BenchmarkItem::validate() const {
    require(!item_id.empty(), Errc::invalid_value, "item_id must be nonempty");
    require(!family_id.empty(), Errc::invalid_value, "family_id must be nonempty");
    require(level >= 1 && level <= 4, Errc::invalid_value,
            "level must be in {1,2,3,4} for item " + item_id);
    require(!scenario_ids.empty(), Errc::empty_scenario_list,
            "item " + item_id + " has no scenarios");
    std::unordered_set<std::string> seen;
    for (const auto& s : scenario_ids)
        require(seen.insert(s).second, Errc::duplicate_id,
                "duplicate scenario_id '" + s + "' in item " + item_id);
}

std::int64_t OutputPayload::element_count() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 1 : n;
}

void OutputPayload::validate() const {
    for (auto d : shape)
        require(d > 0, Errc::invalid_value, "payload shape entries must be positive");
    if (kind == PayloadKind::Scalar) {
        require(shape.empty(), Errc::invalid_value, "scalar payload must have empty shape");
        require(values.size() == 1, Errc::invalid_value, "scalar payload carries one value");
        return;
    }
    require(element_count() == static_cast<std::int64_t>(values.size()), Errc::shape_mismatch,
            "product(shape) must equal length(values)");
    if (kind == PayloadKind::TokenIds || kind == PayloadKind::RankedIds) {
        for (double v : values)
            require(v >= 0.0 && std::floor(v) == v && std::isfinite(v), Errc::invalid_value,
                    "id payloads must contain nonnegative integers");
    }
}

OutputPayload OutputPayload::tensor(std::vector<std::int64_t> shape, std::vector<double> values) {
    OutputPayload p{PayloadKind::NumericTensor, std::move(shape), std::move(values)};
    p.validate();
    return p;
}

OutputPayload OutputPayload::tokens(std::vector<std::int64_t> ids) {
    OutputPayload p;
    p.kind = PayloadKind::TokenIds;
    p.shape = {static_cast<std::int64_t>(ids.size())};
    p.values.assign(ids.begin(), ids.end());
    p.validate();
    return p;
}

OutputPayload OutputPayload::ranking(std::vector<std::int64_t> ids) {
    OutputPayload p = tokens(std::move(ids));
    p.kind = PayloadKind::RankedIds;
    return p;
}

OutputPayload OutputPayload::scalar(double v) {
    OutputPayload p;
    p.kind = PayloadKind::Scalar;
    p.values = {v};
    return p;
}

bool operator==(const OutputPayload& a, const OutputPayload& b) {
    if (a.kind != b.kind || a.shape != b.shape || a.values.size() != b.values.size()) return false;
    // Bitwise comparison so NaN payloads compare equal to themselves.
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double x = a.values[i], y = b.values[i];
        if (std::memcmp(&x, &y, sizeof x) != 0) return false;
    }
    return true;
}

void ScenarioResult::validate() const {
    require(!scenario_id.empty(), Errc::invalid_value, "scenario_id must be nonempty");
    ref_output.validate();
    cand_output.validate();
    for (double v : {ref_runtime_s, cand_runtime_s, ref_throughput, cand_throughput, ref_latency_s,
                     cand_latency_s})
        require(v > 0.0 && std::isfinite(v), Errc::zero_or_negative_measurement,
                "runtimes, throughputs and latencies must be strictly positive in scenario " +
                    scenario_id);
    if (discrepancy)
        require(*discrepancy >= 0.0, Errc::invalid_value, "discrepancy must be >= 0");
}

void RunRecord::validate() const {
    require(!agent_id.empty() && !item_id.empty(), Errc::invalid_value,
            "agent_id and item_id must be nonempty");
    if (status == RunStatus::Ok) {
        require(!scenarios.empty(), Errc::invalid_value,
                "status=ok requires nonempty scenarios for item " + item_id);
        for (const auto& s : scenarios) s.validate();
    } else {
        require(scenarios.empty(), Errc::invalid_value,
                "status!=ok requires empty scenarios for item " + item_id);
    }
}

void RunRecord::validate_against(const BenchmarkItem& item) const {
    validate();
    require(item.item_id == item_id, Errc::invalid_value, "record does not belong to item");
    if (status != RunStatus::Ok) return;
    std::unordered_set<std::string> have;
    for (const auto& s : scenarios) have.insert(s.scenario_id);
    for (const auto& sid : item.scenario_ids)
        require(have.count(sid) > 0, Errc::invalid_value,
                "ok record for item " + item_id + " misses scenario " + sid);
}

void ThresholdEntry::validate() const {
    require(g >= 0.0 && std::isfinite(g), Errc::invalid_value, "g must be finite and >= 0");
    require(f > 0.0 && std::isfinite(f), Errc::invalid_value, "f must be finite and > 0");
    require(g < f, Errc::band_violation, "g must be strictly below f");
    require(tau >= 0.0 && tau <= 1.0, Errc::invalid_value, "tau must be in [0,1]");
}

ThresholdManifest::ThresholdManifest(std::map<std::string, ThresholdEntry> per_item,
                                     std::vector<DtypeTolerance> dtype_table, bool frozen,
                                     double tolerance_scale)
    : per_item_(std::move(per_item)),
      dtype_table_(std::move(dtype_table)),
      frozen_(frozen),
      tolerance_scale_(tolerance_scale) {
    for (const auto& [id, e] : per_item_) e.validate();
    for (const auto& t : dtype_table_) t.validate();
    require(tolerance_scale_ > 0.0 && std::isfinite(tolerance_scale_), Errc::nonpositive_scale,
            "tolerance_scale must be positive");
}

void ThresholdManifest::set_entry(const std::string& item_id, ThresholdEntry e) {
    require(!frozen_, Errc::frozen_manifest, "manifest is frozen");
    e.validate();
    per_item_[item_id] = e;
}

void ThresholdManifest::set_dtype_table(std::vector<DtypeTolerance> table) {
    require(!frozen_, Errc::frozen_manifest, "manifest is frozen");
    for (const auto& t : table) t.validate();
    dtype_table_ = std::move(table);
}

void ThresholdManifest::freeze() { frozen_ = true; }

const ThresholdEntry& ThresholdManifest::entry(const std::string& item_id) const {
    auto it = per_item_.find(item_id);
    require(it != per_item_.end(), Errc::missing_threshold,
            "manifest has no entry for item " + item_id);
    return it->second;
}

void TaskNode::validate() const {
    require(!task_id.empty() && !item_id.empty(), Errc::invalid_value,
            "task_id and item_id must be nonempty");
    require(level >= 1 && level <= 4, Errc::invalid_value,
            "level must be in {1..4} for task " + task_id);
}

// ---------------------------------------------------------------------------

const FamilySpec& Registry::family(const std::string& id) const {
    auto it = families_.find(id);
    require(it != families_.end(), Errc::dangling_family_reference, "unknown family " + id);
    return it->second;
}

const BenchmarkItem& Registry::item(const std::string& id) const {
    auto it = items_.find(id);
    require(it != items_.end(), Errc::invalid_value, "unknown item " + id);
    return it->second;
}

std::map<std::string, std::vector<std::string>> Registry::items_by_family() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [id, item] : items_) out[item.family_id].push_back(id);
    return out;
}

Registry validate_registry(const std::vector<FamilySpec>& families,
                           const std::vector<BenchmarkItem>& items) {
    Registry reg;
    for (const auto& f : families) {
        f.validate();
        require(reg.families_.emplace(f.family_id, f).second, Errc::duplicate_id,
                "duplicate family_id '" + f.family_id + "'");
    }
    for (const auto& it : items) {
        it.validate();
        require(reg.families_.count(it.family_id) > 0, Errc::dangling_family_reference,
                "item " + it.item_id + " references unknown family '" + it.family_id + "'");
        require(reg.items_.emplace(it.item_id, it).second, Errc::duplicate_id,
                "duplicate item_id '" + it.item_id + "'");
    }
    return reg;
}

}  // namespace fk
