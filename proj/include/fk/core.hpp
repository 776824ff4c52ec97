// SPDX-License-Identifier: Apache-2.0
//
// Domain model for the evaluation engine: families, items, payloads, run
// records, threshold manifests, task nodes and scorecards. Values are
// immutable after construction and safe to share across threads.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fk/error.hpp"

namespace fk {

// ---------------------------------------------------------------------------
// Enums

enum class DiscrepancyKind { ElementwiseNumeric, TokenSequence, RankingTopK, ScalarMetric };
enum class Dtype { FP32, FP16, BF16, FP8E4M3, FP8E5M2 };
enum class PayloadKind { NumericTensor, TokenIds, RankedIds, Scalar };
enum class RunStatus { Ok, Blocked, Crash, Hang, ShapeError, IllegalMemory, Nan, TypeError };

const char* to_string(DiscrepancyKind k);
const char* to_string(Dtype d);
const char* to_string(PayloadKind k);
const char* to_string(RunStatus s);

DiscrepancyKind discrepancy_kind_from_string(const std::string& s);
Dtype dtype_from_string(const std::string& s);
PayloadKind payload_kind_from_string(const std::string& s);
RunStatus run_status_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Core value types

struct FamilySpec {
    std::string family_id;
    DiscrepancyKind discrepancy_kind = DiscrepancyKind::ElementwiseNumeric;
    double default_fail_threshold = 0.0;    // family default for f_i
    double default_validity_threshold = 1.0;  // tau_i default, in [0,1]

    void validate() const;
};

struct DtypeTolerance {
    Dtype dtype = Dtype::FP32;
    double atol = 0.0;
    double rtol = 0.0;  // atol and rtol must not both be zero

    void validate() const;
};

// The shipped per-dtype tolerance defaults.
std::vector<DtypeTolerance> default_dtype_table();
const DtypeTolerance& lookup_tolerance(const std::vector<DtypeTolerance>& table, Dtype d);

struct BenchmarkItem {
    std::string item_id;
    std::string family_id;
    int level = 1;  // 1..4
    Dtype dtype = Dtype::FP32;
    std::vector<std::string> scenario_ids;  // nonempty, duplicate-free
    std::string reference_runner;           // worker-program locator

    void validate() const;
};

struct OutputPayload {
    PayloadKind kind = PayloadKind::NumericTensor;
    std::vector<std::int64_t> shape;  // empty for scalar
    std::vector<double> values;       // flat; ids stored as exact integers

    void validate() const;
    std::int64_t element_count() const;

    static OutputPayload tensor(std::vector<std::int64_t> shape, std::vector<double> values);
    static OutputPayload tokens(std::vector<std::int64_t> ids);
    static OutputPayload ranking(std::vector<std::int64_t> ids);
    static OutputPayload scalar(double v);
};

bool operator==(const OutputPayload& a, const OutputPayload& b);

struct ScenarioResult {
    std::string scenario_id;
    OutputPayload ref_output;
    OutputPayload cand_output;
    double ref_runtime_s = 0.0;
    double cand_runtime_s = 0.0;
    double ref_throughput = 0.0;  // units/s
    double cand_throughput = 0.0;
    double ref_latency_s = 0.0;
    double cand_latency_s = 0.0;
    std::optional<double> discrepancy;  // d_{i,r}, cached once computed

    void validate() const;
};

struct RunRecord {
    std::string agent_id;
    std::string item_id;
    RunStatus status = RunStatus::Blocked;
    std::vector<ScenarioResult> scenarios;  // empty unless status == Ok
    std::optional<std::string> profile_attachment;  // opaque

    void validate() const;
    // Checks scenario coverage against the owning item (status == Ok only).
    void validate_against(const BenchmarkItem& item) const;
};

struct ThresholdEntry {
    double g = 0.0;  // indistinguishability band
    double f = 0.0;  // unusable-output threshold, g < f
    double tau = 1.0;

    void validate() const;
};

// Frozen (g, f, tau) bands per item plus the dtype tolerance table. Once
// frozen, per-item entries and the dtype table reject mutation; scaling
// produces a new manifest.
class ThresholdManifest {
  public:
    ThresholdManifest() = default;
    ThresholdManifest(std::map<std::string, ThresholdEntry> per_item,
                      std::vector<DtypeTolerance> dtype_table, bool frozen,
                      double tolerance_scale);

    void set_entry(const std::string& item_id, ThresholdEntry e);
    void set_dtype_table(std::vector<DtypeTolerance> table);
    void freeze();

    bool frozen() const { return frozen_; }
    double tolerance_scale() const { return tolerance_scale_; }
    const std::map<std::string, ThresholdEntry>& per_item() const { return per_item_; }
    const std::vector<DtypeTolerance>& dtype_table() const { return dtype_table_; }
    const ThresholdEntry& entry(const std::string& item_id) const;

  private:
    friend ThresholdManifest scale_manifest(const ThresholdManifest&, double);
    std::map<std::string, ThresholdEntry> per_item_;
    std::vector<DtypeTolerance> dtype_table_;
    bool frozen_ = false;
    double tolerance_scale_ = 1.0;
};

struct TaskNode {
    std::string task_id;
    std::string item_id;
    int level = 1;
    std::set<std::string> dependencies;  // every dependency sits at a strictly lower level
    std::optional<std::string> best_kernel;  // worker-program locator

    void validate() const;
};

struct FamilyScore {
    double c_f = 0.0;
    double coverage_f = 0.0;
    std::optional<double> s_f;  // absent when the family has no valid item
    int valid_count = 0;
    int item_count = 0;
};

struct ScoreCard {
    std::string agent_id;
    double c_macro = 0.0;
    double coverage_item = 0.0;
    double coverage_macro = 0.0;
    // Correct / attempted, where attempted excludes blocked items. Reported
    // alongside coverage_item, which is over the full target set.
    double coverage_attempted = 0.0;
    std::map<double, double> s_macro_by_lambda;  // keys {0, 0.5, 1}; absent when no valid family
    double score_default = 0.0;
    std::map<std::string, FamilyScore> per_family;
    std::set<std::string> valid_families;
    std::optional<std::map<std::string, std::pair<double, double>>> ci_by_family;
    int fast_at_1 = 0;
    int fast_at_1_5 = 0;
};

// ---------------------------------------------------------------------------
// Registry

// Immutable, validated set of families and items.
class Registry {
  public:
    const std::map<std::string, FamilySpec>& families() const { return families_; }
    const std::map<std::string, BenchmarkItem>& items() const { return items_; }
    const FamilySpec& family(const std::string& id) const;
    const BenchmarkItem& item(const std::string& id) const;
    // Item ids grouped per family, in item-id order.
    std::map<std::string, std::vector<std::string>> items_by_family() const;

  private:
    friend Registry validate_registry(const std::vector<FamilySpec>&,
                                      const std::vector<BenchmarkItem>&);
    std::map<std::string, FamilySpec> families_;
    std::map<std::string, BenchmarkItem> items_;
};

Registry validate_registry(const std::vector<FamilySpec>& families,
                           const std::vector<BenchmarkItem>& items);

}  // namespace fk
