// SPDX-License-Identifier: Apache-2.0
//
// Bootstrap confidence intervals, tolerance sensitivity sweeps and
// harness-gap accounting policies.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fk/core.hpp"
#include "fk/scoring.hpp"

namespace fk {

struct BootstrapConfig {
    int replicates = 10000;
    std::uint32_t seed = 42;
    double level = 0.95;
    int small_n_cutoff = 3;  // below this, report the empirical range

    void validate() const;
};

struct BootstrapInterval {
    double lo = 0.0;
    double hi = 0.0;
    std::string method;  // "range" or "percentile"
};

// Percentile bootstrap of the geometric mean. Resample index streams come
// from one seeded generator in replicate order, so the result is identical
// regardless of how many workers evaluate the replicates.
BootstrapInterval bootstrap_ci(const std::vector<double>& speedups, const BootstrapConfig& cfg,
                               int workers = 1);

struct SweepRow {
    double scale = 1.0;
    std::map<int, int> correct_by_level;
    std::map<int, int> total_by_level;
    std::map<int, std::optional<double>> geomean_by_level;
    int correct_total = 0;
    int total = 0;
    std::optional<double> geomean_combined;
};

// Rescores every record under scale_manifest(manifest, scale) and reports
// correct counts and pooled geomeans of blended speedups (lambda = 0.5) over
// the newly-correct sets.
std::vector<SweepRow> sensitivity_sweep(const std::vector<RunRecord>& records,
                                        const Registry& registry,
                                        const ThresholdManifest& manifest,
                                        const std::vector<double>& scales);

enum class GapPolicy { AttemptedOnly, Default, Punitive };

const char* to_string(GapPolicy p);
GapPolicy gap_policy_from_string(const std::string& s);

struct GapResult {
    GapPolicy policy = GapPolicy::Default;
    int correct = 0;
    int denominator = 0;
    std::optional<double> geomean;

    std::string coverage_string() const;  // "correct/denominator"
};

// attempted-only: blocked targets leave both denominators; default: blocked
// targets hurt coverage but not the geomean; punitive: every non-correct
// target contributes the imputed speedup to a geomean over all targets.
GapResult harness_gap(const std::vector<ItemScore>& items, GapPolicy policy,
                      double imputed = 0.01, double lambda = 0.5);

}  // namespace fk
