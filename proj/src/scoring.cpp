// SPDX-License-Identifier: Apache-2.0
#include "fk/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace fk {

double calibrated_correctness(double d, double g, double f) {
    require(g >= 0.0 && std::isfinite(g) && std::isfinite(f) && g < f, Errc::band_violation,
            "calibrated_correctness needs 0 <= g < f");
    require(d >= 0.0, Errc::invalid_value, "d must be >= 0");
    if (d <= g) return 1.0;
    if (d >= f) return 0.0;  // also swallows the +inf sentinel
    return (f - d) / (f - g);
}

ItemScore item_correctness(const RunRecord& record, const ThresholdManifest& manifest) {
    record.validate();
    const ThresholdEntry& band = manifest.entry(record.item_id);

    ItemScore score;
    score.item_id = record.item_id;
    score.status = record.status;
    if (record.status != RunStatus::Ok) {
        score.c_i = 0.0;
        score.valid = false;
        return score;
    }

    double sum = 0.0;
    for (const auto& s : record.scenarios) {
        require(s.discrepancy.has_value(), Errc::missing_discrepancy,
                "scenario " + s.scenario_id + " of item " + record.item_id +
                    " has no cached discrepancy");
        sum += calibrated_correctness(*s.discrepancy, band.g, band.f);
    }
    score.c_i = sum / static_cast<double>(record.scenarios.size());
    score.valid = score.c_i >= band.tau;
    return score;
}

MacroCorrectness family_and_macro_correctness(
    const std::map<std::string, std::vector<ItemScore>>& items_by_family) {
    require(!items_by_family.empty(), Errc::empty_family, "no families to aggregate");
    MacroCorrectness out;
    double macro_sum = 0.0;
    for (const auto& [family, items] : items_by_family) {
        require(!items.empty(), Errc::empty_family, "family " + family + " has no items");
        double sum = 0.0;
        for (const auto& it : items) sum += it.c_i;
        double c_f = sum / static_cast<double>(items.size());
        out.c_by_family[family] = c_f;
        macro_sum += c_f;
    }
    out.c_macro = macro_sum / static_cast<double>(items_by_family.size());
    return out;
}

CoverageResult validity_and_coverage(
    const std::map<std::string, std::vector<ItemScore>>& items_by_family) {
    require(!items_by_family.empty(), Errc::empty_family, "no families to aggregate");
    CoverageResult out;
    std::size_t total = 0, total_valid = 0;
    double macro_sum = 0.0;
    for (const auto& [family, items] : items_by_family) {
        require(!items.empty(), Errc::empty_family, "family " + family + " has no items");
        std::size_t valid = 0;
        for (const auto& it : items)
            if (it.valid) ++valid;
        double cov_f = static_cast<double>(valid) / static_cast<double>(items.size());
        out.coverage_by_family[family] = cov_f;
        macro_sum += cov_f;
        total += items.size();
        total_valid += valid;
    }
    out.coverage_item = static_cast<double>(total_valid) / static_cast<double>(total);
    out.coverage_macro = macro_sum / static_cast<double>(items_by_family.size());
    return out;
}

void blended_speedup(const RunRecord& record, const std::vector<double>& lambdas,
                     ItemScore& score) {
    require(score.valid, Errc::invalid_value,
            "blended_speedup is only defined for valid items (" + record.item_id + ")");
    require(!record.scenarios.empty(), Errc::invalid_value, "valid record without scenarios");

    // Item-level measurements are scenario means.
    double ref_thr = 0.0, cand_thr = 0.0, ref_lat = 0.0, cand_lat = 0.0;
    for (const auto& s : record.scenarios) {
        require(s.ref_throughput > 0.0 && s.cand_throughput > 0.0 && s.ref_latency_s > 0.0 &&
                    s.cand_latency_s > 0.0,
                Errc::zero_or_negative_measurement,
                "nonpositive measurement in scenario " + s.scenario_id);
        ref_thr += s.ref_throughput;
        cand_thr += s.cand_throughput;
        ref_lat += s.ref_latency_s;
        cand_lat += s.cand_latency_s;
    }
    double n = static_cast<double>(record.scenarios.size());
    score.s_thr = (cand_thr / n) / (ref_thr / n);
    score.s_lat = (ref_lat / n) / (cand_lat / n);
    for (double lam : lambdas) {
        require(lam >= 0.0 && lam <= 1.0, Errc::invalid_value, "lambda must be in [0,1]");
        // Exponent identities hold exactly at the endpoints.
        double s;
        if (lam == 1.0)
            s = *score.s_thr;
        else if (lam == 0.0)
            s = *score.s_lat;
        else
            s = std::pow(*score.s_thr, lam) * std::pow(*score.s_lat, 1.0 - lam);
        score.s_blend[lam] = s;
    }
}

double geometric_mean(const std::vector<double>& values) {
    require(!values.empty(), Errc::empty_input, "geometric mean of an empty set");
    double log_sum = 0.0;
    for (double v : values) {
        require(v > 0.0, Errc::nonpositive_speedup, "geometric mean needs positive values");
        log_sum += std::log(v);
    }
    return std::exp(log_sum / static_cast<double>(values.size()));
}

MacroSpeedup macro_speedup(const std::map<std::string, std::vector<ItemScore>>& items_by_family,
                           double lambda) {
    MacroSpeedup out;
    double log_sum = 0.0;
    for (const auto& [family, items] : items_by_family) {
        std::vector<double> s_values;
        for (const auto& it : items) {
            if (!it.valid) continue;
            auto found = it.s_blend.find(lambda);
            require(found != it.s_blend.end(), Errc::invalid_value,
                    "valid item " + it.item_id + " has no blended speedup for this lambda");
            s_values.push_back(found->second);
        }
        if (s_values.empty()) continue;  // family excluded from speedup aggregation
        double s_f = geometric_mean(s_values);
        out.s_by_family[family] = s_f;
        out.valid_families.insert(family);
        log_sum += std::log(s_f);
    }
    if (!out.valid_families.empty())
        out.s_macro = std::exp(log_sum / static_cast<double>(out.valid_families.size()));
    return out;
}

double default_score(const std::optional<double>& s_macro, double c_macro,
                     double coverage_macro) {
    if (!s_macro) return 0.0;
    return *s_macro * c_macro * coverage_macro;
}

int fast_at(const std::vector<double>& valid_speedups, double threshold) {
    require(threshold > 0.0, Errc::invalid_value, "fast@ threshold must be positive");
    int n = 0;
    for (double s : valid_speedups)
        if (s > threshold) ++n;
    return n;
}

std::map<std::string, std::vector<ItemScore>> score_items_by_family(
    const std::vector<RunRecord>& records, const Registry& registry,
    const ThresholdManifest& manifest, const std::vector<double>& lambdas) {
    // One record per item, keyed so iteration is in item-id order.
    std::map<std::string, const RunRecord*> by_item;
    for (const auto& r : records) {
        require(registry.items().count(r.item_id) > 0, Errc::invalid_value,
                "record references unknown item " + r.item_id);
        require(by_item.emplace(r.item_id, &r).second, Errc::duplicate_id,
                "two records for item " + r.item_id);
    }

    std::map<std::string, std::vector<ItemScore>> out;
    for (const auto& [item_id, item] : registry.items()) {
        ItemScore score;
        auto found = by_item.find(item_id);
        if (found == by_item.end()) {
            // Never run: counts as blocked.
            score.item_id = item_id;
            score.status = RunStatus::Blocked;
            score.c_i = 0.0;
            score.valid = false;
        } else {
            score = item_correctness(*found->second, manifest);
            if (score.valid) blended_speedup(*found->second, lambdas, score);
        }
        out[item.family_id].push_back(std::move(score));
    }
    return out;
}

ScoreCard build_scorecard(const std::vector<RunRecord>& records, const Registry& registry,
                          const ThresholdManifest& manifest,
                          const std::vector<double>& lambdas) {
    require(std::find(lambdas.begin(), lambdas.end(), 0.5) != lambdas.end(), Errc::invalid_value,
            "lambda set must contain the 0.5 default");
    std::string agent_id;
    for (const auto& r : records) {
        if (agent_id.empty()) agent_id = r.agent_id;
        require(r.agent_id == agent_id, Errc::mixed_agent_records,
                "records mix agents '" + agent_id + "' and '" + r.agent_id + "'");
    }

    auto by_family = score_items_by_family(records, registry, manifest, lambdas);
    auto correctness = family_and_macro_correctness(by_family);
    auto coverage = validity_and_coverage(by_family);

    ScoreCard card;
    card.agent_id = agent_id;
    card.c_macro = correctness.c_macro;
    card.coverage_item = coverage.coverage_item;
    card.coverage_macro = coverage.coverage_macro;

    std::size_t attempted = 0, attempted_valid = 0;
    for (const auto& [family, items] : by_family)
        for (const auto& it : items) {
            if (it.status == RunStatus::Blocked) continue;
            ++attempted;
            if (it.valid) ++attempted_valid;
        }
    card.coverage_attempted =
        attempted == 0 ? 0.0
                       : static_cast<double>(attempted_valid) / static_cast<double>(attempted);

    std::optional<double> s_macro_default;
    for (double lam : lambdas) {
        auto speedup = macro_speedup(by_family, lam);
        if (speedup.s_macro) card.s_macro_by_lambda[lam] = *speedup.s_macro;
        if (lam == 0.5) {
            s_macro_default = speedup.s_macro;
            card.valid_families = speedup.valid_families;
            for (const auto& [family, s_f] : speedup.s_by_family)
                card.per_family[family].s_f = s_f;
        }
    }

    for (const auto& [family, items] : by_family) {
        FamilyScore& fs = card.per_family[family];
        fs.c_f = correctness.c_by_family.at(family);
        fs.coverage_f = coverage.coverage_by_family.at(family);
        fs.item_count = static_cast<int>(items.size());
        for (const auto& it : items)
            if (it.valid) ++fs.valid_count;
    }

    std::vector<double> valid_s;
    for (const auto& [family, items] : by_family)
        for (const auto& it : items)
            if (it.valid) valid_s.push_back(it.s_blend.at(0.5));
    card.fast_at_1 = fast_at(valid_s, 1.0);
    card.fast_at_1_5 = fast_at(valid_s, 1.5);

    card.score_default = default_score(s_macro_default, card.c_macro, card.coverage_macro);
    return card;
}

}  // namespace fk
