// SPDX-License-Identifier: Apache-2.0
#include "fk/report.hpp"

#include <algorithm>
#include <cstdio>

namespace fk {

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string emit_leaderboard(std::vector<ScoreCard> scorecards) {
    std::sort(scorecards.begin(), scorecards.end(), [](const ScoreCard& a, const ScoreCard& b) {
        if (a.score_default != b.score_default) return a.score_default > b.score_default;
        return a.agent_id < b.agent_id;
    });
    std::string out =
        "agent,s_macro_lambda0,s_macro_lambda0.5,s_macro_lambda1,c_macro,coverage,"
        "coverage_macro,score_default,fast@1,fast@1.5\n";
    for (const auto& c : scorecards) {
        auto lam = [&c](double l) -> std::string {
            auto it = c.s_macro_by_lambda.find(l);
            return it == c.s_macro_by_lambda.end() ? std::string() : fmt3(it->second);
        };
        out += c.agent_id + "," + lam(0.0) + "," + lam(0.5) + "," + lam(1.0) + "," +
               fmt3(c.c_macro) + "," + fmt3(c.coverage_item) + "," + fmt3(c.coverage_macro) +
               "," + fmt3(c.score_default) + "," + std::to_string(c.fast_at_1) + "," +
               std::to_string(c.fast_at_1_5) + "\n";
    }
    return out;
}

std::string emit_sweep_table(const std::vector<SweepRow>& rows) {
    std::string out = "scale,level,correct,total,geomean\n";
    for (const auto& row : rows) {
        for (const auto& [level, total] : row.total_by_level) {
            auto correct = row.correct_by_level.count(level) ? row.correct_by_level.at(level) : 0;
            const auto& gm = row.geomean_by_level.at(level);
            out += fmt3(row.scale) + ",L" + std::to_string(level) + "," +
                   std::to_string(correct) + "," + std::to_string(total) + "," +
                   (gm ? fmt3(*gm) : std::string()) + "\n";
        }
        out += fmt3(row.scale) + ",all," + std::to_string(row.correct_total) + "," +
               std::to_string(row.total) + "," +
               (row.geomean_combined ? fmt3(*row.geomean_combined) : std::string()) + "\n";
    }
    return out;
}

std::string emit_gap_table(const std::vector<GapResult>& results) {
    std::string out = "policy,coverage,geomean\n";
    for (const auto& r : results)
        out += std::string(to_string(r.policy)) + "," + r.coverage_string() + "," +
               (r.geomean ? fmt3(*r.geomean) : std::string()) + "\n";
    return out;
}

std::string emit_routing_table(const std::vector<RoutingSummaryRow>& rows) {
    std::string out = "source,gini,hot_experts\n";
    for (const auto& r : rows) {
        std::string hot;
        for (std::size_t i = 0; i < r.top.size(); ++i) {
            if (i) hot += ";";
            hot += std::to_string(r.top[i]);
        }
        out += r.source + "," + fmt3(r.gini) + "," + hot + "\n";
    }
    return out;
}

std::string emit_bootstrap_line(const BootstrapInterval& ci, std::size_t n) {
    return "n,lo,hi,method\n" + std::to_string(n) + "," + fmt3(ci.lo) + "," + fmt3(ci.hi) + "," +
           ci.method + "\n";
}

}  // namespace fk
