// SPDX-License-Identifier: Apache-2.0
#include "fk/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "fk/discrepancy.hpp"

namespace fk {

void CliffCurve::validate() const {
    require(points.size() >= 4, Errc::invalid_value, "cliff curve needs at least 4 points");
    double max_q = points.front().quality;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        require(p.discrepancy >= 0.0 && std::isfinite(p.discrepancy), Errc::invalid_value,
                "cliff discrepancies must be finite and >= 0");
        require(p.quality >= 0.0 && p.quality <= 1.0, Errc::invalid_value,
                "cliff qualities must be in [0,1]");
        if (i > 0)
            require(p.discrepancy > points[i - 1].discrepancy, Errc::invalid_value,
                    "cliff discrepancies must be strictly increasing");
        max_q = std::max(max_q, p.quality);
    }
    require(points.front().quality == max_q, Errc::invalid_value,
            "first cliff point must carry the maximum quality");
}

double calibrate_g(const BenchmarkItem& item, const std::vector<OutputPayload>& ref_replicates,
                   const DtypeTolerance& tol) {
    require(ref_replicates.size() >= 2, Errc::fewer_than_two_replicates,
            "calibrate_g for item " + item.item_id + " needs at least 2 replicates");
    for (const auto& p : ref_replicates)
        require(p.shape == ref_replicates.front().shape, Errc::shape_mismatch,
                "replicate shapes differ for item " + item.item_id);

    // All ordered pairs, so directionality of the ratio cannot hide observed
    // nondeterminism.
    double worst = 0.0;
    for (std::size_t a = 0; a < ref_replicates.size(); ++a)
        for (std::size_t b = 0; b < ref_replicates.size(); ++b) {
            if (a == b) continue;
            worst = std::max(
                worst, elementwise_error_ratio(ref_replicates[a], ref_replicates[b], tol).d);
        }
    return std::max(1.0, worst);
}

double calibrate_f(const CliffCurve& curve, double g) {
    curve.validate();
    require(g >= 0.0 && std::isfinite(g), Errc::invalid_value, "g must be finite and >= 0");
    require(curve.points.back().discrepancy > g, Errc::invalid_value,
            "cliff curve must extend beyond g");

    const auto& pts = curve.points;

    // Knee: interior point with the largest positive second difference.
    std::optional<std::size_t> knee;
    double best = 0.0;
    for (std::size_t j = 1; j + 1 < pts.size(); ++j) {
        double dd = pts[j + 1].quality - 2.0 * pts[j].quality + pts[j - 1].quality;
        if (dd > 0.0 && (!knee || dd > best)) {
            knee = j;
            best = dd;
        }
    }

    // Fallback: first point where quality drops to half of the initial value.
    double half = 0.5 * pts.front().quality;
    std::optional<std::size_t> fallback;
    for (std::size_t j = 0; j < pts.size(); ++j)
        if (pts[j].quality <= half) {
            fallback = j;
            break;
        }

    if (knee && pts[*knee].discrepancy > g) return pts[*knee].discrepancy;
    // No usable knee; the fallback must exist and clear the band.
    if (!fallback)
        fail(Errc::degenerate_curve, "quality never drops below half of the initial value");
    if (pts[*fallback].discrepancy > g) return pts[*fallback].discrepancy;
    fail(Errc::cliff_inside_band, "every cliff candidate sits at or below g");
}

ThresholdManifest freeze_manifest(const std::map<std::string, ThresholdInput>& per_item,
                                  const std::vector<DtypeTolerance>& dtype_table,
                                  double tau_default) {
    std::map<std::string, ThresholdEntry> entries;
    for (const auto& [id, in] : per_item) {
        ThresholdEntry e{in.g, in.f, in.tau.value_or(tau_default)};
        e.validate();  // rejects g >= f
        entries[id] = e;
    }
    ThresholdManifest m(std::move(entries), dtype_table, /*frozen=*/false,
                        /*tolerance_scale=*/1.0);
    m.freeze();
    return m;
}

ThresholdManifest scale_manifest(const ThresholdManifest& manifest, double scale) {
    require(manifest.frozen(), Errc::unfrozen_manifest, "scale_manifest needs a frozen manifest");
    require(scale > 0.0 && std::isfinite(scale), Errc::nonpositive_scale,
            "scale must be positive");

    std::map<std::string, ThresholdEntry> scaled;
    for (const auto& [id, e] : manifest.per_item())
        scaled[id] = ThresholdEntry{e.g * scale, e.f * scale, e.tau};
    ThresholdManifest out(std::move(scaled), manifest.dtype_table(), /*frozen=*/false,
                          manifest.tolerance_scale() * scale);
    out.freeze();
    return out;
}

}  // namespace fk
