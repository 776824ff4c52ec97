// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fk/calibration.hpp"
#include "fk/kernels.hpp"
#include "fk/scoring.hpp"
#include "helpers.hpp"

using namespace fk;

namespace {

// Builds an ok record whose scenarios carry the given cached discrepancies
// and measurement means.
RunRecord record_with(const std::string& item, std::vector<double> ds, double s_thr = 1.0,
                      double s_lat = 1.0, const std::string& agent = "a") {
    RunRecord r;
    r.agent_id = agent;
    r.item_id = item;
    r.status = RunStatus::Ok;
    int i = 0;
    for (double d : ds) {
        ScenarioResult s;
        s.scenario_id = "s" + std::to_string(i++);
        s.ref_output = OutputPayload::scalar(0.0);
        s.cand_output = OutputPayload::scalar(0.0);
        s.ref_runtime_s = s.cand_runtime_s = 1e-3;
        s.ref_throughput = 100.0;
        s.cand_throughput = 100.0 * s_thr;
        s.ref_latency_s = 1e-2 * s_lat;  // ref/cand ratio = s_lat
        s.cand_latency_s = 1e-2;
        s.discrepancy = d;
        r.scenarios.push_back(std::move(s));
    }
    return r;
}

RunRecord failed_record(const std::string& item, RunStatus status,
                        const std::string& agent = "a") {
    RunRecord r;
    r.agent_id = agent;
    r.item_id = item;
    r.status = status;
    return r;
}

ThresholdManifest manifest_for(std::vector<std::string> items, double g = 1.0, double f = 3.0,
                               double tau = 1.0) {
    std::map<std::string, ThresholdInput> per_item;
    for (const auto& id : items) per_item[id] = {g, f, tau};
    return freeze_manifest(per_item, default_dtype_table());
}

ItemScore valid_item(const std::string& id, double s) {
    ItemScore it;
    it.item_id = id;
    it.c_i = 1.0;
    it.valid = true;
    it.status = RunStatus::Ok;
    it.s_thr = s;
    it.s_lat = s;
    it.s_blend[0.5] = s;
    return it;
}

ItemScore invalid_item(const std::string& id, RunStatus status = RunStatus::Ok) {
    ItemScore it;
    it.item_id = id;
    it.c_i = 0.0;
    it.valid = false;
    it.status = status;
    return it;
}

}  // namespace

TEST_CASE("calibrated correctness boundaries and midpoint") {
    CHECK(calibrated_correctness(1.0, 1.0, 3.0) == 1.0);
    CHECK(calibrated_correctness(3.0, 1.0, 3.0) == 0.0);
    CHECK(calibrated_correctness(2.0, 1.0, 3.0) == 0.5);
    CHECK(calibrated_correctness(std::numeric_limits<double>::infinity(), 1.0, 3.0) == 0.0);
    CHECK(calibrated_correctness(0.0, 0.0, 0.5) == 1.0);
    CHECK_THROWS_WITH_AS(calibrated_correctness(1.0, 3.0, 3.0),
                         doctest::Contains("band-violation"), Error);
}

TEST_CASE("calibrated correctness is continuous and affine on the ramp") {
    double g = 1.0, f = 3.0, eps = 1e-10;
    CHECK(std::abs(calibrated_correctness(g + eps, g, f) - 1.0) < 1e-9);
    CHECK(std::abs(calibrated_correctness(f - eps, g, f) - 0.0) < 1e-9);
    // Finite-difference slope equals -1/(f-g).
    double h = 1e-6;
    double slope = (calibrated_correctness(2.0 + h, g, f) - calibrated_correctness(2.0, g, f)) / h;
    CHECK(slope == doctest::Approx(-1.0 / (f - g)).epsilon(1e-9));
}

TEST_CASE("calibrated correctness is monotone nonincreasing in d") {
    DetRng rng(303);
    for (int i = 0; i < 1000; ++i) {
        double g = rng.uniform() * 2.0;
        double f = g + 0.01 + rng.uniform() * 5.0;
        double d1 = rng.uniform() * 8.0;
        double d2 = d1 + rng.uniform() * 4.0;
        CHECK(calibrated_correctness(d2, g, f) <= calibrated_correctness(d1, g, f));
    }
}

TEST_CASE("item correctness: scenario mean and crash zeroing") {
    ThresholdManifest m = manifest_for({"i"});
    // C = {1, 0} -> 0.5.
    ItemScore sc = item_correctness(record_with("i", {0.5, 3.5}), m);
    CHECK(sc.c_i == 0.5);
    CHECK_FALSE(sc.valid);

    sc = item_correctness(failed_record("i", RunStatus::Crash), m);
    CHECK(sc.c_i == 0.0);
    CHECK_FALSE(sc.valid);
    CHECK(sc.status == RunStatus::Crash);

    sc = item_correctness(record_with("i", {0.2, 0.9, 1.0}), m);
    CHECK(sc.c_i == 1.0);
    CHECK(sc.valid);

    RunRecord missing = record_with("i", {0.5});
    missing.scenarios[0].discrepancy.reset();
    CHECK_THROWS_WITH_AS(item_correctness(missing, m),
                         doctest::Contains("missing-discrepancy"), Error);
}

TEST_CASE("non-ok statuses always yield invalid zero-correctness items") {
    ThresholdManifest m = manifest_for({"i"});
    for (RunStatus st : {RunStatus::Blocked, RunStatus::Crash, RunStatus::Hang,
                         RunStatus::ShapeError, RunStatus::IllegalMemory, RunStatus::Nan,
                         RunStatus::TypeError}) {
        ItemScore sc = item_correctness(failed_record("i", st), m);
        CHECK(sc.c_i == 0.0);
        CHECK_FALSE(sc.valid);
        CHECK(sc.s_blend.empty());
    }
}

TEST_CASE("family and macro correctness") {
    std::map<std::string, std::vector<ItemScore>> fams;
    fams["a"] = {valid_item("a1", 1.0)};
    fams["b"] = {invalid_item("b1")};
    fams["a"][0].c_i = 1.0;
    fams["b"][0].c_i = 0.5;
    auto mc = family_and_macro_correctness(fams);
    CHECK(mc.c_by_family["a"] == 1.0);
    CHECK(mc.c_by_family["b"] == 0.5);
    CHECK(mc.c_macro == 0.75);

    // Macro weighting: 10 perfect items in one family vs 1 zero item.
    std::map<std::string, std::vector<ItemScore>> skew;
    for (int i = 0; i < 10; ++i) skew["big"].push_back(valid_item("x" + std::to_string(i), 1.0));
    skew["small"].push_back(invalid_item("y"));
    CHECK(family_and_macro_correctness(skew).c_macro == 0.5);

    std::map<std::string, std::vector<ItemScore>> single;
    single["only"] = {valid_item("z", 1.0)};
    CHECK(family_and_macro_correctness(single).c_macro == 1.0);

    std::map<std::string, std::vector<ItemScore>> empty_family;
    empty_family["e"] = {};
    CHECK_THROWS_WITH_AS(family_and_macro_correctness(empty_family),
                         doctest::Contains("empty-family"), Error);
}

TEST_CASE("validity and coverage") {
    std::map<std::string, std::vector<ItemScore>> fams;
    fams["a"] = {valid_item("a1", 1.0), valid_item("a2", 1.0)};
    fams["b"] = {invalid_item("b1"), invalid_item("b2")};
    auto cov = validity_and_coverage(fams);
    CHECK(cov.coverage_item == 0.5);
    CHECK(cov.coverage_macro == 0.5);

    // 4/4 valid vs 0/1: item 0.8, macro 0.5.
    std::map<std::string, std::vector<ItemScore>> uneven;
    for (int i = 0; i < 4; ++i) uneven["a"].push_back(valid_item("a" + std::to_string(i), 1.0));
    uneven["b"].push_back(invalid_item("b"));
    cov = validity_and_coverage(uneven);
    CHECK(cov.coverage_item == 0.8);
    CHECK(cov.coverage_macro == 0.5);
}

TEST_CASE("blended speedup: lambda endpoints exact, 0.5 neutral") {
    RunRecord r = record_with("i", {0.0, 0.0}, /*s_thr=*/2.0, /*s_lat=*/0.5);
    ItemScore sc = item_correctness(r, manifest_for({"i"}));
    REQUIRE(sc.valid);
    blended_speedup(r, {0.0, 0.5, 1.0}, sc);
    CHECK(*sc.s_thr == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*sc.s_lat == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sc.s_blend[1.0] == *sc.s_thr);   // exponent identity, exact
    CHECK(sc.s_blend[0.0] == *sc.s_lat);
    CHECK(sc.s_blend[0.5] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lambda blend unit law on random reciprocal pairs") {
    DetRng rng(17);
    for (int i = 0; i < 200; ++i) {
        double s_thr = 0.05 + rng.uniform() * 8.0;
        RunRecord r = record_with("i", {0.0}, s_thr, 1.0 / s_thr);
        ItemScore sc = item_correctness(r, manifest_for({"i"}));
        blended_speedup(r, {0.5}, sc);
        CHECK(sc.s_blend[0.5] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("macro speedup: family geomeans and exclusion of empty families") {
    std::map<std::string, std::vector<ItemScore>> fams;
    fams["a"] = {valid_item("a1", 4.0), valid_item("a2", 1.0)};
    auto ms = macro_speedup(fams, 0.5);
    CHECK(ms.s_by_family["a"] == doctest::Approx(2.0).epsilon(1e-12));

    fams["b"] = {valid_item("b1", 0.5)};
    fams["a"] = {valid_item("a1", 2.0)};
    ms = macro_speedup(fams, 0.5);
    CHECK(*ms.s_macro == doctest::Approx(1.0).epsilon(1e-12));

    // A family with no valid items is excluded, not zeroed.
    fams["c"] = {invalid_item("c1"), invalid_item("c2")};
    ms = macro_speedup(fams, 0.5);
    CHECK(ms.valid_families == std::set<std::string>{"a", "b"});
    CHECK(*ms.s_macro == doctest::Approx(1.0).epsilon(1e-12));

    std::map<std::string, std::vector<ItemScore>> none;
    none["c"] = {invalid_item("c1")};
    CHECK_FALSE(macro_speedup(none, 0.5).s_macro.has_value());
}

TEST_CASE("pooled geomean recomposition: 48 x 1.035 with 40 x 0.844") {
    std::map<std::string, std::vector<ItemScore>> fams;
    for (int i = 0; i < 48; ++i)
        fams["one"].push_back(valid_item("l1-" + std::to_string(i), 1.035));
    for (int i = 0; i < 40; ++i)
        fams["one"].push_back(valid_item("l2-" + std::to_string(i), 0.844));
    double s_f = macro_speedup(fams, 0.5).s_by_family.at("one");
    double oracle = std::exp((48.0 * std::log(1.035) + 40.0 * std::log(0.844)) / 88.0);
    CHECK(s_f == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(s_f == doctest::Approx(0.943).epsilon(0.0011));
}

TEST_CASE("geomean recomposition law over random partitions") {
    DetRng rng(88);
    for (int trial = 0; trial < 30; ++trial) {
        std::map<std::string, std::vector<ItemScore>> fams;
        int n = 2 + static_cast<int>(rng.next() % 20);
        std::vector<double> s_values;
        for (int i = 0; i < n; ++i) {
            double s = 0.1 + rng.uniform() * 3.0;
            s_values.push_back(s);
            fams["f"].push_back(valid_item("i" + std::to_string(i), s));
        }
        double s_f = macro_speedup(fams, 0.5).s_by_family.at("f");
        // Split into two groups; count-weighted mean of group log-geomeans.
        std::size_t cut = 1 + rng.next() % (s_values.size() - 1);
        double log_a = 0.0, log_b = 0.0;
        for (std::size_t i = 0; i < cut; ++i) log_a += std::log(s_values[i]);
        for (std::size_t i = cut; i < s_values.size(); ++i) log_b += std::log(s_values[i]);
        double recomposed = std::exp((log_a + log_b) / static_cast<double>(n));
        CHECK(s_f == doctest::Approx(recomposed).epsilon(1e-9));
    }
}

TEST_CASE("default score and fast@k") {
    CHECK(default_score(1.0, 1.0, 1.0) == 1.0);
    CHECK(default_score(2.0, 0.5, 1.0) == 1.0);
    CHECK(default_score(std::nullopt, 0.9, 0.9) == 0.0);

    CHECK(fast_at({1.2, 0.9, 1.6}, 1.0) == 2);
    CHECK(fast_at({1.2, 0.9, 1.6}, 1.5) == 1);
    CHECK(fast_at({}, 1.0) == 0);
    CHECK(fast_at({1.0, 1.5}, 1.0) == 1);  // strict inequality
}

namespace {

Registry two_family_registry() {
    std::vector<FamilySpec> fams = {
        {"alpha", DiscrepancyKind::ElementwiseNumeric, 3.0, 1.0},
        {"beta", DiscrepancyKind::TokenSequence, 0.5, 0.8},
    };
    std::vector<BenchmarkItem> items = {
        {"a1", "alpha", 1, Dtype::FP32, {"s0", "s1"}, "builtin:rmsnorm"},
        {"a2", "alpha", 1, Dtype::FP32, {"s0", "s1"}, "builtin:rmsnorm"},
        {"b1", "beta", 2, Dtype::FP32, {"s0", "s1"}, "builtin:rmsnorm"},
        {"b2", "beta", 2, Dtype::FP32, {"s0", "s1"}, "builtin:rmsnorm"},
    };
    return validate_registry(fams, items);
}

ThresholdManifest two_family_manifest() {
    std::map<std::string, ThresholdInput> per_item;
    per_item["a1"] = {1.0, 3.0, 1.0};
    per_item["a2"] = {1.0, 3.0, 1.0};
    per_item["b1"] = {0.05, 0.5, 0.8};
    per_item["b2"] = {0.05, 0.5, 0.8};
    return freeze_manifest(per_item, default_dtype_table());
}

std::vector<RunRecord> two_family_records(const std::string& agent = "fix") {
    // a1: correct, s_thr 2.0, s_lat 0.45 (blend safely below 1). a2: crash.
    // b1: C just below tau. b2: correct, s_thr = s_lat = 1.2.
    return {
        record_with("a1", {0.5, 1.0}, 2.0, 0.45, agent),
        failed_record("a2", RunStatus::Crash, agent),
        record_with("b1", {0.0, 0.25}, 1.0, 1.0, agent),
        record_with("b2", {0.0, 0.0}, 1.2, 1.2, agent),
    };
}

}  // namespace

TEST_CASE("build_scorecard matches the spreadsheet oracle on the two-family fixture") {
    ScoreCard card =
        build_scorecard(two_family_records(), two_family_registry(), two_family_manifest());

    // Oracle, computed independently from the fixture's definitions.
    double c_b1 = (1.0 + (0.5 - 0.25) / (0.5 - 0.05)) / 2.0;
    double c_alpha = (1.0 + 0.0) / 2.0;
    double c_beta = (c_b1 + 1.0) / 2.0;
    double c_macro = (c_alpha + c_beta) / 2.0;
    CHECK(card.agent_id == "fix");
    CHECK(card.c_macro == doctest::Approx(c_macro).epsilon(1e-12));
    CHECK(card.per_family.at("alpha").c_f == doctest::Approx(c_alpha).epsilon(1e-12));
    CHECK(card.per_family.at("beta").c_f == doctest::Approx(c_beta).epsilon(1e-12));

    // Valid: a1 and b2 only.
    CHECK(card.coverage_item == 0.5);
    CHECK(card.coverage_macro == 0.5);
    CHECK(card.coverage_attempted == doctest::Approx(0.5).epsilon(1e-12));  // 2 of 4 attempted

    double s_a1 = std::pow(2.0, 0.5) * std::pow(0.45, 0.5);
    double s_b2 = std::pow(1.2, 0.5) * std::pow(1.2, 0.5);
    double s_macro = std::exp((std::log(s_a1) + std::log(s_b2)) / 2.0);
    CHECK(card.s_macro_by_lambda.at(0.5) == doctest::Approx(s_macro).epsilon(1e-9));
    CHECK(card.s_macro_by_lambda.at(1.0) ==
          doctest::Approx(std::exp((std::log(2.0) + std::log(1.2)) / 2.0)).epsilon(1e-9));
    CHECK(card.s_macro_by_lambda.at(0.0) ==
          doctest::Approx(std::exp((std::log(0.45) + std::log(1.2)) / 2.0)).epsilon(1e-9));
    CHECK(card.score_default ==
          doctest::Approx(s_macro * c_macro * 0.5).epsilon(1e-9));
    CHECK(card.valid_families == std::set<std::string>{"alpha", "beta"});
    CHECK(card.fast_at_1 == 1);   // only b2 strictly above 1
    CHECK(card.fast_at_1_5 == 0);
}

TEST_CASE("build_scorecard: degenerate agents") {
    Registry reg = two_family_registry();
    ThresholdManifest m = two_family_manifest();

    // Zero records: everything blocked.
    ScoreCard empty = build_scorecard({}, reg, m);
    CHECK(empty.score_default == 0.0);
    CHECK(empty.coverage_item == 0.0);
    CHECK(empty.coverage_attempted == 0.0);
    CHECK(empty.s_macro_by_lambda.empty());

    // Mixed agents rejected.
    auto records = two_family_records();
    records[1].agent_id = "other";
    CHECK_THROWS_WITH_AS(build_scorecard(records, reg, m),
                         doctest::Contains("mixed-agent-records"), Error);

    // Duplicate records for one item rejected.
    records = two_family_records();
    records.push_back(record_with("a1", {0.0, 0.0}, 1.0, 1.0, "fix"));
    CHECK_THROWS_WITH_AS(build_scorecard(records, reg, m), doctest::Contains("duplicate-id"),
                         Error);
}

TEST_CASE("order invariance: shuffled records give an identical card") {
    Registry reg = two_family_registry();
    ThresholdManifest m = two_family_manifest();
    auto records = two_family_records();
    ScoreCard base = build_scorecard(records, reg, m);
    std::reverse(records.begin(), records.end());
    ScoreCard shuffled = build_scorecard(records, reg, m);
    CHECK(serialize_scorecard(base) == serialize_scorecard(shuffled));
}

TEST_CASE("macro dominance guard: duplicating a family's items changes nothing") {
    std::map<std::string, std::vector<ItemScore>> fams;
    fams["a"] = {valid_item("a1", 1.4), invalid_item("a2")};
    fams["b"] = {valid_item("b1", 0.7)};
    auto c0 = family_and_macro_correctness(fams);
    auto cov0 = validity_and_coverage(fams);
    auto s0 = macro_speedup(fams, 0.5);

    auto doubled = fams;
    for (const auto& it : fams["a"]) {
        ItemScore copy = it;
        copy.item_id += "-dup";
        doubled["a"].push_back(copy);
    }
    auto c1 = family_and_macro_correctness(doubled);
    auto cov1 = validity_and_coverage(doubled);
    auto s1 = macro_speedup(doubled, 0.5);
    CHECK(std::abs(c1.c_macro - c0.c_macro) < 1e-12);
    CHECK(std::abs(cov1.coverage_macro - cov0.coverage_macro) < 1e-12);
    CHECK(std::abs(*s1.s_macro - *s0.s_macro) < 1e-12);
}

TEST_CASE("no-credit guard: invalid items are excluded from aggregation") {
    DetRng rng(1212);
    for (int trial = 0; trial < 40; ++trial) {
        std::map<std::string, std::vector<ItemScore>> fams;
        int n = 2 + static_cast<int>(rng.next() % 6);
        for (int i = 0; i < n; ++i)
            fams["f"].push_back(valid_item("i" + std::to_string(i), 0.2 + rng.uniform() * 3.0));
        auto cov0 = validity_and_coverage(fams);

        // Invalidate one item; brute-force recomputation over the remaining
        // valid set must equal the reported family geomean.
        std::size_t victim = rng.next() % fams["f"].size();
        fams["f"][victim].valid = false;
        auto invalidated_s = fams["f"][victim].s_blend;
        fams["f"][victim].s_blend.clear();
        fams["f"][victim].s_thr.reset();
        fams["f"][victim].s_lat.reset();

        auto cov1 = validity_and_coverage(fams);
        CHECK(cov1.coverage_item <= cov0.coverage_item);
        CHECK(cov1.coverage_macro <= cov0.coverage_macro);

        auto ms = macro_speedup(fams, 0.5);
        if (n > 1) {
            double log_sum = 0.0;
            int count = 0;
            for (const auto& it : fams["f"])
                if (it.valid) {
                    log_sum += std::log(it.s_blend.at(0.5));
                    ++count;
                }
            REQUIRE(count == n - 1);
            CHECK(ms.s_by_family.at("f") ==
                  doctest::Approx(std::exp(log_sum / count)).epsilon(1e-9));
        }
        (void)invalidated_s;
    }
}
