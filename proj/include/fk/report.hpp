// SPDX-License-Identifier: Apache-2.0
//
// Delimiter-separated table emission: leaderboard, sensitivity sweep,
// harness-gap and routing summaries. Tables use fixed 3-decimal formatting;
// records output keeps full precision.
#pragma once

#include <string>
#include <vector>

#include "fk/core.hpp"
#include "fk/routing.hpp"
#include "fk/stats.hpp"

namespace fk {

std::string fmt3(double v);

// Rows sorted descending by Score_default, ties by agent_id.
std::string emit_leaderboard(std::vector<ScoreCard> scorecards);

std::string emit_sweep_table(const std::vector<SweepRow>& rows);

std::string emit_gap_table(const std::vector<GapResult>& results);

struct RoutingSummaryRow {
    std::string source;
    double gini = 0.0;
    std::vector<int> top;  // hot experts, descending load
};

std::string emit_routing_table(const std::vector<RoutingSummaryRow>& rows);

std::string emit_bootstrap_line(const BootstrapInterval& ci, std::size_t n);

}  // namespace fk
