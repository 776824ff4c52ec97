// SPDX-License-Identifier: Apache-2.0
#include "fk/routing.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "fk/records.hpp"

namespace fk {

void ExpertLoad::validate() const {
    require(num_experts > 0, Errc::invalid_value, "num_experts must be positive");
    require(counts.size() == static_cast<std::size_t>(num_experts), Errc::invalid_value,
            "counts length must equal num_experts");
    std::int64_t sum = 0;
    for (auto c : counts) {
        require(c >= 0, Errc::invalid_value, "counts must be nonnegative");
        sum += c;
    }
    require(sum > 0, Errc::invalid_value, "total load must be positive");
}

ExpertLoad expert_load(const OutputPayload& gate_logits, int k, const std::string& source_label) {
    require(gate_logits.kind == PayloadKind::NumericTensor, Errc::kind_mismatch,
            "gate logits must be a numeric tensor");
    require(gate_logits.shape.size() == 2, Errc::shape_mismatch,
            "gate logits must be [tokens, experts]");
    auto tokens = gate_logits.shape[0];
    auto experts = gate_logits.shape[1];
    require(k > 0 && k <= experts, Errc::k_exceeds_experts, "k must be in [1, num_experts]");

    ExpertLoad load;
    load.num_experts = static_cast<int>(experts);
    load.counts.assign(static_cast<std::size_t>(experts), 0);
    load.source_label = source_label;

    std::vector<int> order(static_cast<std::size_t>(experts));
    for (std::int64_t t = 0; t < tokens; ++t) {
        const double* row = gate_logits.values.data() + t * experts;
        std::iota(order.begin(), order.end(), 0);
        // Descending logit, ties to the lower expert index.
        std::stable_sort(order.begin(), order.end(),
                         [row](int a, int b) { return row[a] > row[b]; });
        for (int slot = 0; slot < k; ++slot) load.counts[static_cast<std::size_t>(order[slot])]++;
    }
    load.validate();
    return load;
}

double gini(const ExpertLoad& load) {
    load.validate();
    // Sorted form of the mean-absolute-difference definition:
    //   Gini = (2 * sum_i i*c_(i)) / (n * sum c) - (n + 1) / n,  i = 1..n.
    std::vector<std::int64_t> sorted = load.counts;
    std::sort(sorted.begin(), sorted.end());
    double n = static_cast<double>(sorted.size());
    double total = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        total += static_cast<double>(sorted[i]);
        weighted += static_cast<double>(i + 1) * static_cast<double>(sorted[i]);
    }
    return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

std::vector<int> hot_experts(const ExpertLoad& load, int top) {
    load.validate();
    require(top > 0 && top <= load.num_experts, Errc::k_exceeds_experts,
            "top must be in [1, num_experts]");
    std::vector<int> order(load.counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&load](int a, int b) {
        return load.counts[static_cast<std::size_t>(a)] >
               load.counts[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(top));
    return order;
}

std::string expert_load_record_line(const ExpertLoad& load) {
    load.validate();
    return record_line("expert_load", {{"num_experts", load.num_experts},
                                       {"counts", load.counts},
                                       {"source_label", load.source_label}});
}

ExpertLoad expert_load_from_record_line(const std::string& line) {
    auto [type, j] = parse_record_line(line);
    require(type == "expert_load", Errc::parse_error,
            "expected an expert_load record, got '" + type + "'");
    ExpertLoad load;
    load.num_experts = j.at("num_experts").get<int>();
    load.counts = j.at("counts").get<std::vector<std::int64_t>>();
    load.source_label = j.at("source_label").get<std::string>();
    load.validate();
    return load;
}

OverlapResult hot_expert_overlap(const ExpertLoad& a, const ExpertLoad& b, int top) {
    require(a.num_experts == b.num_experts, Errc::expert_count_mismatch,
            "expert counts differ between loads");
    auto ta = hot_experts(a, top);
    auto tb = hot_experts(b, top);
    std::unordered_set<int> sa(ta.begin(), ta.end());
    OverlapResult r;
    for (int e : tb)
        if (sa.count(e) > 0) ++r.shared;
    r.fraction = static_cast<double>(r.shared) / static_cast<double>(top);
    return r;
}

}  // namespace fk
