// SPDX-License-Identifier: Apache-2.0
//
// Calibrated correctness, validity, coverage, blended throughput/latency
// speedups and the macro aggregations, assembled into a ScoreCard per agent.
// All aggregates accumulate in item-id order so results are bit-identical
// regardless of evaluation order.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fk/core.hpp"

namespace fk {

struct ItemScore {
    std::string item_id;
    double c_i = 0.0;
    bool valid = false;
    RunStatus status = RunStatus::Blocked;
    std::optional<double> s_thr;               // absent iff not valid
    std::optional<double> s_lat;               // absent iff not valid
    std::map<double, double> s_blend;          // lambda -> s; empty iff not valid
};

// 1 at or below g, 0 at or above f, linear ramp in between.
double calibrated_correctness(double d, double g, double f);

// C_i = mean over scenarios of per-scenario correctness; any non-ok status
// scores 0 and is invalid.
ItemScore item_correctness(const RunRecord& record, const ThresholdManifest& manifest);

struct MacroCorrectness {
    std::map<std::string, double> c_by_family;
    double c_macro = 0.0;
};

// items_by_family: family -> ItemScores (every family nonempty).
MacroCorrectness family_and_macro_correctness(
    const std::map<std::string, std::vector<ItemScore>>& items_by_family);

struct CoverageResult {
    double coverage_item = 0.0;
    double coverage_macro = 0.0;
    std::map<std::string, double> coverage_by_family;
};

CoverageResult validity_and_coverage(
    const std::map<std::string, std::vector<ItemScore>>& items_by_family);

// Per-item throughput/latency speedups from scenario-mean measurements, then
// s = s_thr^lambda * s_lat^(1-lambda). Only called for valid items.
void blended_speedup(const RunRecord& record, const std::vector<double>& lambdas,
                     ItemScore& score);

struct MacroSpeedup {
    std::map<std::string, double> s_by_family;   // S_f over valid families
    std::optional<double> s_macro;               // absent when no valid family
    std::set<std::string> valid_families;
};

// Geometric means over valid items per family, then over valid families.
MacroSpeedup macro_speedup(const std::map<std::string, std::vector<ItemScore>>& items_by_family,
                           double lambda);

// Equally weighted product; 0 when S_macro is absent.
double default_score(const std::optional<double>& s_macro, double c_macro,
                     double coverage_macro);

// Number of valid items with blended speedup strictly above the threshold.
int fast_at(const std::vector<double>& valid_speedups, double threshold);

// Geometric mean helper shared with the statistics module.
double geometric_mean(const std::vector<double>& values);

// Assembles a full ScoreCard for one agent. Records must all carry the same
// agent_id; items without a record count as blocked. Scenario discrepancies
// must already be cached (dispatch_discrepancy or the harness does this).
ScoreCard build_scorecard(const std::vector<RunRecord>& records, const Registry& registry,
                          const ThresholdManifest& manifest,
                          const std::vector<double>& lambdas = {0.0, 0.5, 1.0});

// Per-item scores keyed by family, as used by build_scorecard; exposed for
// the statistics module's sweeps.
std::map<std::string, std::vector<ItemScore>> score_items_by_family(
    const std::vector<RunRecord>& records, const Registry& registry,
    const ThresholdManifest& manifest, const std::vector<double>& lambdas);

}  // namespace fk
