// SPDX-License-Identifier: Apache-2.0
#include "fk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "fk/calibration.hpp"

namespace fk {

void BootstrapConfig::validate() const {
    require(replicates >= 1, Errc::invalid_value, "replicates must be >= 1");
    require(level > 0.0 && level < 1.0, Errc::invalid_value, "level must be in (0,1)");
    require(small_n_cutoff >= 0, Errc::invalid_value, "small_n_cutoff must be >= 0");
}

namespace {

// Nearest-rank percentile: the smallest order statistic whose rank r
// satisfies r/B >= q. The epsilon guards exact-integer ranks against
// floating-point drift in q*B.
double nearest_rank(const std::vector<double>& sorted, double q) {
    auto b = static_cast<double>(sorted.size());
    int rank = static_cast<int>(std::ceil(q * b - 1e-9));
    rank = std::clamp(rank, 1, static_cast<int>(sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
}

}  // namespace

BootstrapInterval bootstrap_ci(const std::vector<double>& speedups, const BootstrapConfig& cfg,
                               int workers) {
    cfg.validate();
    require(!speedups.empty(), Errc::empty_input, "bootstrap_ci needs a nonempty sample");
    for (double s : speedups)
        require(s > 0.0 && std::isfinite(s), Errc::nonpositive_speedup,
                "speedups must be positive and finite");
    require(workers >= 1, Errc::invalid_value, "workers must be >= 1");

    std::size_t n = speedups.size();
    if (static_cast<int>(n) < cfg.small_n_cutoff) {
        auto [lo, hi] = std::minmax_element(speedups.begin(), speedups.end());
        return {*lo, *hi, "range"};
    }

    // Draw all resample indices from one generator in replicate order; the
    // raw 32-bit stream is fully specified, so this is reproducible across
    // platforms (std::uniform_int_distribution is not).
    std::size_t b = static_cast<std::size_t>(cfg.replicates);
    std::vector<std::uint32_t> indices(b * n);
    std::mt19937 rng(cfg.seed);
    for (auto& ix : indices) ix = rng() % static_cast<std::uint32_t>(n);

    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(speedups[i]);

    std::vector<double> stats(b);
    auto run_range = [&](std::size_t from, std::size_t to) {
        for (std::size_t r = from; r < to; ++r) {
            double sum = 0.0;
            const std::uint32_t* row = indices.data() + r * n;
            for (std::size_t i = 0; i < n; ++i) sum += logs[row[i]];
            stats[r] = std::exp(sum / static_cast<double>(n));
        }
    };
    if (workers == 1 || b < 2) {
        run_range(0, b);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (b + static_cast<std::size_t>(workers) - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t from = static_cast<std::size_t>(w) * chunk;
            if (from >= b) break;
            pool.emplace_back(run_range, from, std::min(b, from + chunk));
        }
        for (auto& t : pool) t.join();
    }

    std::sort(stats.begin(), stats.end());
    double q_lo = (1.0 - cfg.level) / 2.0;
    return {nearest_rank(stats, q_lo), nearest_rank(stats, 1.0 - q_lo), "percentile"};
}

std::vector<SweepRow> sensitivity_sweep(const std::vector<RunRecord>& records,
                                        const Registry& registry,
                                        const ThresholdManifest& manifest,
                                        const std::vector<double>& scales) {
    std::vector<SweepRow> rows;
    for (double scale : scales) {
        ThresholdManifest scaled = scale_manifest(manifest, scale);
        auto by_family = score_items_by_family(records, registry, scaled, {0.5});

        SweepRow row;
        row.scale = scale;
        std::map<int, std::vector<double>> s_by_level;
        std::vector<double> s_all;
        for (const auto& [family, items] : by_family) {
            for (const auto& it : items) {
                int level = registry.item(it.item_id).level;
                row.total_by_level[level] += 1;
                row.total += 1;
                if (!it.valid) continue;
                row.correct_by_level[level] += 1;
                row.correct_total += 1;
                double s = it.s_blend.at(0.5);
                s_by_level[level].push_back(s);
                s_all.push_back(s);
            }
        }
        for (const auto& [level, total] : row.total_by_level) {
            auto found = s_by_level.find(level);
            row.geomean_by_level[level] =
                found == s_by_level.end()
                    ? std::nullopt
                    : std::optional<double>(geometric_mean(found->second));
        }
        if (!s_all.empty()) row.geomean_combined = geometric_mean(s_all);
        rows.push_back(std::move(row));
    }
    return rows;
}

const char* to_string(GapPolicy p) {
    switch (p) {
        case GapPolicy::AttemptedOnly: return "attempted-only";
        case GapPolicy::Default: return "default";
        case GapPolicy::Punitive: return "punitive";
    }
    return "?";
}

GapPolicy gap_policy_from_string(const std::string& s) {
    if (s == "attempted-only") return GapPolicy::AttemptedOnly;
    if (s == "default") return GapPolicy::Default;
    if (s == "punitive") return GapPolicy::Punitive;
    fail(Errc::unknown_policy, "unknown harness-gap policy '" + s + "'");
}

std::string GapResult::coverage_string() const {
    return std::to_string(correct) + "/" + std::to_string(denominator);
}

GapResult harness_gap(const std::vector<ItemScore>& items, GapPolicy policy, double imputed,
                      double lambda) {
    require(imputed > 0.0, Errc::invalid_value, "imputed speedup must be positive");

    GapResult out;
    out.policy = policy;
    std::vector<double> pool;
    int attempted = 0;
    for (const auto& it : items) {
        if (it.status != RunStatus::Blocked) ++attempted;
        if (it.valid) {
            ++out.correct;
            pool.push_back(it.s_blend.at(lambda));
        } else if (policy == GapPolicy::Punitive) {
            pool.push_back(imputed);
        }
    }
    out.denominator = policy == GapPolicy::AttemptedOnly ? attempted
                                                         : static_cast<int>(items.size());
    if (!pool.empty()) out.geomean = geometric_mean(pool);
    return out;
}

}  // namespace fk
