// SPDX-License-Identifier: Apache-2.0
//
// Deterministic CPU stand-in kernels used by the worker: reference
// implementations, a reordered-but-equivalent optimized variant, and
// fault-injected candidates (noise, NaN, wrong shape). Composite kernels
// (mlp, block, pipeline) call their sub-kernels through named slots so the
// harness can rebind and capture them.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fk/core.hpp"

namespace fk {

// Deterministic 64-bit generator (splitmix64); fully specified, unlike the
// standard distributions.
struct DetRng {
    std::uint64_t state;

    explicit DetRng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next();
    double uniform();                  // [0, 1)
    double symmetric();                // [-1, 1)
};

std::uint64_t fnv1a(const std::string& s);

// Sub-kernel dispatch context. `bindings` maps slot names (task ids) to
// builtin specs; missing slots fall back to the slot's reference builtin.
// When `capture` is set it sees every sub-kernel invocation's inputs.
struct KernelContext {
    std::map<std::string, std::string> bindings;
    std::function<void(const std::string& slot, const std::vector<OutputPayload>& inputs)> capture;

    OutputPayload invoke(const std::string& slot, const std::vector<OutputPayload>& inputs);
};

// Evaluates a builtin spec (the part after "builtin:") on the given inputs.
// Specs compose left to right, e.g. "noise:rmsnorm:0.25" or "nan:linear".
OutputPayload eval_builtin(const std::string& spec, const std::vector<OutputPayload>& inputs,
                           KernelContext& ctx);

bool is_builtin(const std::string& spec);

// Leaf kernels.
OutputPayload rmsnorm(const OutputPayload& x, const OutputPayload& w, double eps);
OutputPayload linear(const OutputPayload& a, const OutputPayload& b);      // tiled matmul
OutputPayload linear_opt(const OutputPayload& a, const OutputPayload& b);  // reordered loops
OutputPayload gelu(const OutputPayload& x);
OutputPayload softmax(const OutputPayload& x);
OutputPayload moe_gate_ranking(const OutputPayload& logits);  // full ranking, ties to lower id
std::vector<int> topk_experts(const OutputPayload& logits, int k);

// "builtin:..." locator helpers.
inline std::string builtin_locator(const std::string& spec) { return "builtin:" + spec; }
bool parse_builtin_locator(const std::string& locator, std::string& spec);

}  // namespace fk
