// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fk/calibration.hpp"
#include "fk/discrepancy.hpp"
#include "fk/kernels.hpp"
#include "helpers.hpp"

using namespace fk;

namespace {

const DtypeTolerance kFp32{Dtype::FP32, 1e-5, 1e-3};

BenchmarkItem dummy_item() {
    return {"i", "f", 1, Dtype::FP32, {"s0"}, "builtin:rmsnorm"};
}

OutputPayload vec(std::vector<double> v) {
    std::vector<std::int64_t> shape{static_cast<std::int64_t>(v.size())};
    return OutputPayload::tensor(std::move(shape), std::move(v));
}

// All-pairs max oracle, both orientations.
double pairwise_max_oracle(const std::vector<OutputPayload>& reps, const DtypeTolerance& tol) {
    double worst = 0.0;
    for (std::size_t a = 0; a < reps.size(); ++a)
        for (std::size_t b = 0; b < reps.size(); ++b)
            if (a != b) worst = std::max(worst, elementwise_error_ratio(reps[a], reps[b], tol).d);
    return worst;
}

CliffCurve curve_of(std::vector<std::pair<double, double>> pts) {
    CliffCurve c;
    for (auto [d, q] : pts) c.points.push_back({d, q});
    return c;
}

}  // namespace

TEST_CASE("calibrate_g: bitwise-identical replicates collapse to the band floor") {
    OutputPayload r = vec({1.0, -2.0, 0.5});
    CHECK(calibrate_g(dummy_item(), {r, r, r}, kFp32) == 1.0);
}

TEST_CASE("calibrate_g: observed nondeterminism above the floor raises g") {
    double band = 1e-5 + 1e-3 * 1.0;
    OutputPayload a = vec({1.0, 2.0});
    OutputPayload b = vec({1.0 + 1.7 * band, 2.0});
    double g = calibrate_g(dummy_item(), {a, b}, kFp32);
    CHECK(g == doctest::Approx(1.7).epsilon(1e-9));
    CHECK(g == doctest::Approx(pairwise_max_oracle({a, b}, kFp32)).epsilon(1e-12));
}

TEST_CASE("calibrate_g: all pairs below the floor clamp to 1.0") {
    double band = 1e-5 + 1e-3 * 1.0;
    OutputPayload a = vec({1.0});
    OutputPayload b = vec({1.0 + 0.3 * band});
    OutputPayload c = vec({1.0 + 0.8 * band});
    CHECK(pairwise_max_oracle({a, b, c}, kFp32) < 1.0);
    CHECK(calibrate_g(dummy_item(), {a, b, c}, kFp32) == 1.0);
}

TEST_CASE("calibrate_g: errors") {
    CHECK_THROWS_WITH_AS(calibrate_g(dummy_item(), {vec({1.0})}, kFp32),
                         doctest::Contains("fewer-than-two-replicates"), Error);
    CHECK_THROWS_WITH_AS(calibrate_g(dummy_item(), {vec({1.0}), vec({1.0, 2.0})}, kFp32),
                         doctest::Contains("shape-mismatch"), Error);
}

TEST_CASE("calibrate_g: permutation-invariant and monotone in replicates") {
    DetRng rng(6060);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<OutputPayload> reps;
        int n = 2 + static_cast<int>(rng.next() % 4);
        for (int i = 0; i < n; ++i) {
            std::vector<double> v(4);
            for (auto& x : v) x = 1.0 + 0.01 * rng.symmetric();
            reps.push_back(vec(v));
        }
        double g = calibrate_g(dummy_item(), reps, kFp32);
        std::vector<OutputPayload> shuffled = reps;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(calibrate_g(dummy_item(), shuffled, kFp32) == g);

        std::vector<double> extra(4);
        for (auto& x : extra) x = 1.0 + 0.05 * rng.symmetric();
        reps.push_back(vec(extra));
        CHECK(calibrate_g(dummy_item(), reps, kFp32) >= g);
    }
}

TEST_CASE("calibrate_f: knee at the quality collapse") {
    CliffCurve c = curve_of({{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 0.2}, {4, 0.1}});
    // Exhaustive second-difference oracle.
    double best = -1e9;
    std::size_t best_j = 0;
    for (std::size_t j = 1; j + 1 < c.points.size(); ++j) {
        double dd = c.points[j + 1].quality - 2 * c.points[j].quality + c.points[j - 1].quality;
        if (dd > best) {
            best = dd;
            best_j = j;
        }
    }
    CHECK(best > 0.0);
    CHECK(c.points[best_j].discrepancy == 3.0);
    CHECK(calibrate_f(c, 1.0) == 3.0);
}

TEST_CASE("calibrate_f: linear decay falls back to the half-quality crossing") {
    CliffCurve c = curve_of({{0, 1.0}, {2, 0.75}, {4, 0.5}, {6, 0.25}, {8, 0.0}});
    CHECK(calibrate_f(c, 1.0) == 4.0);
}

TEST_CASE("calibrate_f: flat curve is degenerate") {
    CliffCurve c = curve_of({{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}});
    CHECK_THROWS_WITH_AS(calibrate_f(c, 1.0), doctest::Contains("degenerate-curve"), Error);
}

TEST_CASE("calibrate_f: knee inside the band uses the fallback, both inside errors") {
    // Knee at 0.5 (inside g=1), half-quality crossing at 2.0 (outside).
    CliffCurve c = curve_of({{0.0, 1.0}, {0.25, 0.9}, {0.5, 0.6}, {2.0, 0.5}, {3.0, 0.45}});
    CHECK(calibrate_f(c, 1.0) == 2.0);

    // Every knee/fallback candidate at or below g, though the curve itself
    // extends past it.
    CliffCurve inside = curve_of({{0.0, 1.0}, {0.2, 0.9}, {0.4, 0.3}, {0.9, 0.1}, {1.5, 0.05}});
    CHECK_THROWS_WITH_AS(calibrate_f(inside, 1.0), doctest::Contains("cliff-inside-band"),
                         Error);
}

TEST_CASE("cliff curve validation") {
    CHECK_THROWS_AS(curve_of({{0, 1.0}, {1, 0.5}, {2, 0.2}}).validate(), Error);  // 3 points
    CHECK_THROWS_AS(curve_of({{0, 1.0}, {1, 0.5}, {1, 0.4}, {2, 0.2}}).validate(), Error);
    CHECK_THROWS_AS(curve_of({{0, 0.8}, {1, 1.0}, {2, 0.5}, {3, 0.2}}).validate(),
                    Error);  // first not max
    CHECK_THROWS_AS(calibrate_f(curve_of({{0, 1.0}, {0.1, 0.9}, {0.2, 0.5}, {0.3, 0.1}}), 1.0),
                    Error);  // curve never passes g
}

TEST_CASE("freeze_manifest: defaults, band violations, immutability") {
    ThresholdManifest m = freeze_manifest({{"i", {1.0, 3.0, std::nullopt}}},
                                          default_dtype_table());
    CHECK(m.frozen());
    CHECK(m.tolerance_scale() == 1.0);
    CHECK(m.entry("i").tau == 1.0);
    CHECK_THROWS_WITH_AS(m.set_entry("j", {1.0, 2.0, 1.0}),
                         doctest::Contains("frozen-manifest"), Error);

    CHECK_THROWS_WITH_AS(
        freeze_manifest({{"i", {3.0, 3.0, std::nullopt}}}, default_dtype_table()),
        doctest::Contains("band-violation"), Error);

    ThresholdManifest withtau =
        freeze_manifest({{"i", {0.0, 0.5, 0.8}}}, default_dtype_table(), 1.0);
    CHECK(withtau.entry("i").tau == 0.8);
}

TEST_CASE("scale_manifest: identity, quarter scale, errors") {
    ThresholdManifest m = freeze_manifest({{"i", {1.0, 3.0, std::nullopt}}},
                                          default_dtype_table());
    ThresholdManifest same = scale_manifest(m, 1.0);
    CHECK(same.entry("i").g == 1.0);
    CHECK(same.entry("i").f == 3.0);
    CHECK(same.tolerance_scale() == 1.0);

    ThresholdManifest quarter = scale_manifest(m, 0.25);
    CHECK(quarter.entry("i").g == 0.25);
    CHECK(quarter.entry("i").f == 0.75);
    CHECK(quarter.tolerance_scale() == 0.25);
    CHECK(quarter.frozen());
    // Original untouched.
    CHECK(m.entry("i").g == 1.0);

    CHECK_THROWS_WITH_AS(scale_manifest(m, 0.0), doctest::Contains("nonpositive-scale"), Error);

    ThresholdManifest unfrozen({{"i", {1.0, 3.0, 1.0}}}, default_dtype_table(), false, 1.0);
    CHECK_THROWS_WITH_AS(scale_manifest(unfrozen, 2.0), doctest::Contains("unfrozen-manifest"),
                         Error);
}

TEST_CASE("scale_manifest composes multiplicatively and preserves g < f") {
    DetRng rng(909);
    for (int trial = 0; trial < 50; ++trial) {
        double g = rng.uniform() * 2.0;
        double f = g + 0.1 + rng.uniform() * 4.0;
        ThresholdManifest m =
            freeze_manifest({{"i", {g, f, std::nullopt}}}, default_dtype_table());
        double a = 0.1 + rng.uniform() * 3.0;
        double b = 0.1 + rng.uniform() * 3.0;
        ThresholdManifest ab = scale_manifest(scale_manifest(m, a), b);
        ThresholdManifest prod = scale_manifest(m, a * b);
        CHECK(ab.entry("i").g == doctest::Approx(prod.entry("i").g).epsilon(1e-15));
        CHECK(ab.entry("i").f == doctest::Approx(prod.entry("i").f).epsilon(1e-15));
        CHECK(ab.entry("i").g < ab.entry("i").f);
    }
}
