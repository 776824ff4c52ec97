// SPDX-License-Identifier: Apache-2.0
//
// Threshold derivation: g from reference-vs-reference nondeterminism, f from
// the knee of a quality-cliff curve, frozen into a ThresholdManifest.
#pragma once

#include <map>
#include <vector>

#include "fk/core.hpp"

namespace fk {

struct CliffPoint {
    double discrepancy = 0.0;
    double quality = 0.0;  // in [0,1]
};

struct CliffCurve {
    std::vector<CliffPoint> points;  // strictly increasing in discrepancy

    void validate() const;  // >= 4 points, first quality is the curve max
};

// g = max(1.0, max over ordered replicate pairs of the elementwise error
// ratio). The floor of 1.0 is the dtype band itself in ratio space.
double calibrate_g(const BenchmarkItem& item, const std::vector<OutputPayload>& ref_replicates,
                   const DtypeTolerance& tol);

// f = discrepancy of the interior point maximizing the discrete second
// difference of quality; falls back to the first half-quality crossing when
// no interior point curves upward. Result is always > g.
double calibrate_f(const CliffCurve& curve, double g);

struct ThresholdInput {
    double g = 0.0;
    double f = 0.0;
    std::optional<double> tau;  // absent -> tau_default
};

ThresholdManifest freeze_manifest(const std::map<std::string, ThresholdInput>& per_item,
                                  const std::vector<DtypeTolerance>& dtype_table,
                                  double tau_default = 1.0);

// Returns a new manifest with every (g, f) multiplied by scale; the input is
// untouched.
ThresholdManifest scale_manifest(const ThresholdManifest& manifest, double scale);

}  // namespace fk
