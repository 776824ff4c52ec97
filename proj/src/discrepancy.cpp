// SPDX-License-Identifier: Apache-2.0
#include "fk/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace fk {

namespace {

void expect_kind(const OutputPayload& p, PayloadKind k, const char* who) {
    require(p.kind == k, Errc::kind_mismatch,
            std::string(who) + " expects payload kind " + to_string(k) + ", got " +
                to_string(p.kind));
}

}  // namespace

DiscrepancyReport elementwise_error_ratio(const OutputPayload& cand, const OutputPayload& ref,
                                          const DtypeTolerance& tol) {
    expect_kind(cand, PayloadKind::NumericTensor, "elementwise_error_ratio");
    expect_kind(ref, PayloadKind::NumericTensor, "elementwise_error_ratio");
    require(cand.shape == ref.shape, Errc::shape_mismatch,
            "candidate and reference shapes differ");
    tol.validate();

    DiscrepancyReport rep;
    rep.kind = DiscrepancyKind::ElementwiseNumeric;
    double worst = 0.0;
    std::optional<std::int64_t> worst_index;
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        double r = ref.values[i];
        require(std::isfinite(r), Errc::non_finite_reference,
                "reference contains a non-finite value");
        double c = cand.values[i];
        double ratio;
        if (std::isnan(c)) {
            ratio = std::numeric_limits<double>::infinity();
        } else {
            double diff = std::abs(c - r);
            if (diff == 0.0) {
                ratio = 0.0;
            } else {
                double band = tol.atol + tol.rtol * std::abs(r);
                ratio = band > 0.0 ? diff / band : std::numeric_limits<double>::infinity();
            }
        }
        if (ratio > worst || !worst_index) {
            worst = ratio;
            worst_index = static_cast<std::int64_t>(i);
        }
    }
    rep.d = ref.values.empty() ? 0.0 : worst;
    rep.worst_index = worst_index;
    return rep;
}

DiscrepancyReport token_mismatch_rate(const OutputPayload& cand, const OutputPayload& ref) {
    expect_kind(cand, PayloadKind::TokenIds, "token_mismatch_rate");
    expect_kind(ref, PayloadKind::TokenIds, "token_mismatch_rate");
    require(!ref.values.empty(), Errc::empty_reference, "reference token sequence is empty");

    std::size_t len_ref = ref.values.size();
    std::size_t len_cand = cand.values.size();
    std::size_t common = std::min(len_ref, len_cand);
    std::size_t mismatches = std::max(len_ref, len_cand) - common;
    for (std::size_t i = 0; i < common; ++i)
        if (cand.values[i] != ref.values[i]) ++mismatches;

    DiscrepancyReport rep;
    rep.kind = DiscrepancyKind::TokenSequence;
    rep.d = std::min(1.0, static_cast<double>(mismatches) / static_cast<double>(len_ref));
    return rep;
}

DiscrepancyReport topk_rank_disagreement(const OutputPayload& cand, const OutputPayload& ref,
                                         int k) {
    expect_kind(cand, PayloadKind::RankedIds, "topk_rank_disagreement");
    expect_kind(ref, PayloadKind::RankedIds, "topk_rank_disagreement");
    require(k > 0, Errc::invalid_value, "k must be positive");
    require(static_cast<std::size_t>(k) <= cand.values.size() &&
                static_cast<std::size_t>(k) <= ref.values.size(),
            Errc::k_exceeds_length, "k exceeds a ranking's length");

    std::unordered_set<std::int64_t> ref_top;
    for (int i = 0; i < k; ++i) ref_top.insert(static_cast<std::int64_t>(ref.values[i]));
    int shared = 0;
    for (int i = 0; i < k; ++i)
        if (ref_top.count(static_cast<std::int64_t>(cand.values[i])) > 0) ++shared;

    DiscrepancyReport rep;
    rep.kind = DiscrepancyKind::RankingTopK;
    rep.d = 1.0 - static_cast<double>(shared) / static_cast<double>(k);
    return rep;
}

DiscrepancyReport scalar_abs_delta(const OutputPayload& cand, const OutputPayload& ref) {
    expect_kind(cand, PayloadKind::Scalar, "scalar_abs_delta");
    expect_kind(ref, PayloadKind::Scalar, "scalar_abs_delta");
    require(std::isfinite(ref.values[0]) && std::isfinite(cand.values[0]), Errc::non_finite_input,
            "scalar metrics must be finite");

    DiscrepancyReport rep;
    rep.kind = DiscrepancyKind::ScalarMetric;
    rep.d = std::abs(cand.values[0] - ref.values[0]);
    return rep;
}

DiscrepancyReport dispatch_discrepancy(const FamilySpec& family, ScenarioResult& scenario,
                                       const DtypeTolerance& tol, const DispatchConfig& cfg) {
    DiscrepancyReport rep;
    switch (family.discrepancy_kind) {
        case DiscrepancyKind::ElementwiseNumeric:
            rep = elementwise_error_ratio(scenario.cand_output, scenario.ref_output, tol);
            break;
        case DiscrepancyKind::TokenSequence:
            rep = token_mismatch_rate(scenario.cand_output, scenario.ref_output);
            break;
        case DiscrepancyKind::RankingTopK:
            rep = topk_rank_disagreement(scenario.cand_output, scenario.ref_output, cfg.topk_k);
            break;
        case DiscrepancyKind::ScalarMetric:
            rep = scalar_abs_delta(scenario.cand_output, scenario.ref_output);
            break;
    }
    rep.scenario_id = scenario.scenario_id;
    scenario.discrepancy = rep.d;
    return rep;
}

}  // namespace fk
