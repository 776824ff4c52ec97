// SPDX-License-Identifier: Apache-2.0
//
// Expert-routing analytics: top-k load histograms, Gini skew and hot-expert
// overlap between input distributions.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fk/core.hpp"

namespace fk {

struct ExpertLoad {
    int num_experts = 0;
    std::vector<std::int64_t> counts;  // length num_experts, sum > 0
    std::string source_label;

    void validate() const;
};

// counts[e] = number of (token, slot) assignments routing to expert e under
// top-k selection of the gate logits ([tokens, experts] tensor). Ties break
// to the lower expert index.
ExpertLoad expert_load(const OutputPayload& gate_logits, int k,
                       const std::string& source_label = "");

// Normalized mean absolute difference of the counts (population form).
double gini(const ExpertLoad& load);

struct OverlapResult {
    int shared = 0;
    double fraction = 0.0;
};

// |top-N(a) ∩ top-N(b)| where top-N selects the N highest counts, ties to
// the lower expert index.
OverlapResult hot_expert_overlap(const ExpertLoad& a, const ExpertLoad& b, int top = 16);

// The top-N expert indices themselves, in descending-count order.
std::vector<int> hot_experts(const ExpertLoad& load, int top);

// Load histograms travel as fk-records/1 lines of type "expert_load".
std::string expert_load_record_line(const ExpertLoad& load);
ExpertLoad expert_load_from_record_line(const std::string& line);

}  // namespace fk
