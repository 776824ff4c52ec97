// SPDX-License-Identifier: Apache-2.0
//
// Family-specific discrepancy functions. Numeric families work in ratio
// space: per element, |cand - ref| / (atol + rtol*|ref|), so the
// indistinguishability band sits at 1.0 and tolerance sweeps are a single
// multiplication of (g, f).
#pragma once

#include <optional>
#include <string>

#include "fk/core.hpp"

namespace fk {

struct DiscrepancyReport {
    std::string scenario_id;
    double d = 0.0;
    std::optional<std::int64_t> worst_index;  // argmax element, numeric kind only
    DiscrepancyKind kind = DiscrepancyKind::ElementwiseNumeric;
};

// Max elementwise error ratio. A NaN in cand yields d = +inf (a sentinel
// above any f), not an error; a non-finite ref is an error because the
// reference is trusted. Ties on the argmax break to the lowest flat index.
DiscrepancyReport elementwise_error_ratio(const OutputPayload& cand, const OutputPayload& ref,
                                          const DtypeTolerance& tol);

// Fraction of mismatching positions over max(len_ref, 1); length differences
// count as mismatches and the result is capped at 1.
DiscrepancyReport token_mismatch_rate(const OutputPayload& cand, const OutputPayload& ref);

// 1 - |top-k(cand) ∩ top-k(ref)| / k.
DiscrepancyReport topk_rank_disagreement(const OutputPayload& cand, const OutputPayload& ref,
                                         int k);

// |cand - ref| on precomputed scalar quality metrics.
DiscrepancyReport scalar_abs_delta(const OutputPayload& cand, const OutputPayload& ref);

struct DispatchConfig {
    int topk_k = 20;
};

// Routes to the function matching the family's discrepancy kind and caches
// the result into the scenario.
DiscrepancyReport dispatch_discrepancy(const FamilySpec& family, ScenarioResult& scenario,
                                       const DtypeTolerance& tol,
                                       const DispatchConfig& cfg = {});

}  // namespace fk
