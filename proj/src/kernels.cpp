// SPDX-License-Identifier: Apache-2.0
#include "fk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fk {

std::uint64_t DetRng::next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double DetRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
double DetRng::symmetric() { return 2.0 * uniform() - 1.0; }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

void expect_inputs(const std::vector<OutputPayload>& inputs, std::size_t n, const char* who) {
    require(inputs.size() == n, Errc::invalid_value,
            std::string(who) + " expects " + std::to_string(n) + " inputs, got " +
                std::to_string(inputs.size()));
}

void expect_matrix(const OutputPayload& p, const char* who) {
    require(p.kind == PayloadKind::NumericTensor && p.shape.size() == 2, Errc::kind_mismatch,
            std::string(who) + " expects a rank-2 numeric tensor");
}

// Rows = all leading dims, cols = last dim.
std::pair<std::int64_t, std::int64_t> rows_cols(const OutputPayload& p) {
    require(p.kind == PayloadKind::NumericTensor && !p.shape.empty(), Errc::kind_mismatch,
            "expected a numeric tensor");
    std::int64_t cols = p.shape.back();
    std::int64_t rows = 1;
    for (std::size_t i = 0; i + 1 < p.shape.size(); ++i) rows *= p.shape[i];
    return {rows, cols};
}

double scalar_value(const OutputPayload& p, const char* who) {
    require(p.kind == PayloadKind::Scalar, Errc::kind_mismatch,
            std::string(who) + " expects a scalar payload");
    return p.values[0];
}

}  // namespace

OutputPayload rmsnorm(const OutputPayload& x, const OutputPayload& w, double eps) {
    auto [rows, cols] = rows_cols(x);
    require(w.kind == PayloadKind::NumericTensor && w.element_count() == cols,
            Errc::shape_mismatch, "rmsnorm weight length must match the last dim");
    OutputPayload y = x;
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.values.data() + r * cols;
        double sq = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) sq += row[c] * row[c];
        double inv = 1.0 / std::sqrt(sq / static_cast<double>(cols) + eps);
        double* out = y.values.data() + r * cols;
        for (std::int64_t c = 0; c < cols; ++c) out[c] = row[c] * inv * w.values[c];
    }
    return y;
}

OutputPayload linear(const OutputPayload& a, const OutputPayload& b) {
    expect_matrix(a, "linear");
    expect_matrix(b, "linear");
    std::int64_t m = a.shape[0], k = a.shape[1], k2 = b.shape[0], n = b.shape[1];
    require(k == k2, Errc::shape_mismatch, "linear inner dimensions differ");

    OutputPayload c;
    c.kind = PayloadKind::NumericTensor;
    c.shape = {m, n};
    c.values.assign(static_cast<std::size_t>(m * n), 0.0);

    constexpr std::int64_t T = 16;  // tile edge
    for (std::int64_t i0 = 0; i0 < m; i0 += T)
        for (std::int64_t p0 = 0; p0 < k; p0 += T)
            for (std::int64_t j0 = 0; j0 < n; j0 += T)
                for (std::int64_t i = i0; i < std::min(i0 + T, m); ++i)
                    for (std::int64_t p = p0; p < std::min(p0 + T, k); ++p) {
                        double av = a.values[static_cast<std::size_t>(i * k + p)];
                        for (std::int64_t j = j0; j < std::min(j0 + T, n); ++j)
                            c.values[static_cast<std::size_t>(i * n + j)] +=
                                av * b.values[static_cast<std::size_t>(p * n + j)];
                    }
    return c;
}

OutputPayload linear_opt(const OutputPayload& a, const OutputPayload& b) {
    expect_matrix(a, "linear");
    expect_matrix(b, "linear");
    std::int64_t m = a.shape[0], k = a.shape[1], k2 = b.shape[0], n = b.shape[1];
    require(k == k2, Errc::shape_mismatch, "linear inner dimensions differ");

    OutputPayload c;
    c.kind = PayloadKind::NumericTensor;
    c.shape = {m, n};
    c.values.assign(static_cast<std::size_t>(m * n), 0.0);

    // Untiled i-k-j accumulation: a different summation order than the tiled
    // reference, numerically equivalent within the dtype band.
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
            double av = a.values[static_cast<std::size_t>(i * k + p)];
            const double* brow = b.values.data() + p * n;
            double* crow = c.values.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    return c;
}

OutputPayload gelu(const OutputPayload& x) {
    require(x.kind == PayloadKind::NumericTensor, Errc::kind_mismatch,
            "gelu expects a numeric tensor");
    OutputPayload y = x;
    for (double& v : y.values) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    return y;
}

OutputPayload softmax(const OutputPayload& x) {
    auto [rows, cols] = rows_cols(x);
    OutputPayload y = x;
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.values.data() + r * cols;
        double* out = y.values.data() + r * cols;
        double mx = row[0];
        for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) {
            out[c] = std::exp(row[c] - mx);
            sum += out[c];
        }
        for (std::int64_t c = 0; c < cols; ++c) out[c] /= sum;
    }
    return y;
}

OutputPayload moe_gate_ranking(const OutputPayload& logits) {
    require(logits.kind == PayloadKind::NumericTensor && logits.shape.size() == 1,
            Errc::kind_mismatch, "moe_gate expects a rank-1 logit tensor");
    std::vector<int> order(logits.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&logits](int a, int b) {
        return logits.values[static_cast<std::size_t>(a)] >
               logits.values[static_cast<std::size_t>(b)];
    });
    std::vector<std::int64_t> ids(order.begin(), order.end());
    return OutputPayload::ranking(std::move(ids));
}

std::vector<int> topk_experts(const OutputPayload& logits, int k) {
    require(k > 0 && static_cast<std::size_t>(k) <= logits.values.size(), Errc::k_exceeds_experts,
            "k exceeds the expert count");
    OutputPayload ranking = moe_gate_ranking(logits);
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(static_cast<int>(ranking.values[i]));
    return out;
}

OutputPayload KernelContext::invoke(const std::string& slot,
                                    const std::vector<OutputPayload>& inputs) {
    if (capture) capture(slot, inputs);
    auto found = bindings.find(slot);
    std::string spec = found != bindings.end() ? found->second : builtin_locator(slot);
    std::string inner;
    require(parse_builtin_locator(spec, inner), Errc::unknown_builtin,
            "slot '" + slot + "' is bound to non-builtin locator '" + spec + "'");
    return eval_builtin(inner, inputs, *this);
}

namespace {

// mlp(x, w1, w2) = linear(gelu(linear(x, w1)), w2)
OutputPayload mlp_kernel(const std::vector<OutputPayload>& inputs, KernelContext& ctx) {
    expect_inputs(inputs, 3, "mlp");
    OutputPayload h = ctx.invoke("linear", {inputs[0], inputs[1]});
    OutputPayload act = ctx.invoke("gelu", {h});
    return ctx.invoke("linear", {act, inputs[2]});
}

// block(x, norm_w, w1, w2) = x + mlp(rmsnorm(x, norm_w), w1, w2)
OutputPayload block_kernel(const std::vector<OutputPayload>& inputs, KernelContext& ctx) {
    expect_inputs(inputs, 4, "block");
    OutputPayload normed =
        ctx.invoke("rmsnorm", {inputs[0], inputs[1], OutputPayload::scalar(1e-6)});
    OutputPayload h = ctx.invoke("mlp", {normed, inputs[2], inputs[3]});
    require(h.shape == inputs[0].shape, Errc::shape_mismatch, "block mlp changed the shape");
    OutputPayload y = inputs[0];
    for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += h.values[i];
    return y;
}

// pipeline(x, nw_a, w1_a, w2_a, nw_b, w1_b, w2_b, final_nw):
// two residual blocks followed by a final norm.
OutputPayload pipeline_kernel(const std::vector<OutputPayload>& inputs, KernelContext& ctx) {
    expect_inputs(inputs, 8, "pipeline");
    OutputPayload h = ctx.invoke("block", {inputs[0], inputs[1], inputs[2], inputs[3]});
    h = ctx.invoke("block", {h, inputs[4], inputs[5], inputs[6]});
    return ctx.invoke("rmsnorm", {h, inputs[7], OutputPayload::scalar(1e-6)});
}

OutputPayload add_noise(OutputPayload y, double amplitude) {
    require(y.kind == PayloadKind::NumericTensor, Errc::kind_mismatch,
            "noise applies to numeric outputs");
    DetRng rng(0x5eedULL);
    for (double& v : y.values) v *= 1.0 + amplitude * rng.symmetric();
    return y;
}

}  // namespace

OutputPayload eval_builtin(const std::string& spec, const std::vector<OutputPayload>& inputs,
                           KernelContext& ctx) {
    auto parts = split(spec, ':');
    const std::string& name = parts[0];

    if (name == "rmsnorm") {
        expect_inputs(inputs, 3, "rmsnorm");
        return rmsnorm(inputs[0], inputs[1], scalar_value(inputs[2], "rmsnorm eps"));
    }
    if (name == "linear") {
        expect_inputs(inputs, 2, "linear");
        return linear(inputs[0], inputs[1]);
    }
    if (name == "opt_linear") {
        expect_inputs(inputs, 2, "opt_linear");
        return linear_opt(inputs[0], inputs[1]);
    }
    if (name == "gelu") {
        expect_inputs(inputs, 1, "gelu");
        return gelu(inputs[0]);
    }
    if (name == "softmax") {
        expect_inputs(inputs, 1, "softmax");
        return softmax(inputs[0]);
    }
    if (name == "moe_gate") {
        expect_inputs(inputs, 1, "moe_gate");
        return moe_gate_ranking(inputs[0]);
    }
    if (name == "mlp") return mlp_kernel(inputs, ctx);
    if (name == "block") return block_kernel(inputs, ctx);
    if (name == "pipeline") return pipeline_kernel(inputs, ctx);

    if (name == "noise") {
        require(parts.size() == 3, Errc::unknown_builtin, "noise:<base>:<amplitude>");
        std::string base = parts[1];
        double amp = std::stod(parts[2]);
        OutputPayload y = eval_builtin(base, inputs, ctx);
        if (y.kind == PayloadKind::RankedIds) {
            // Rankings are perturbed upstream: jitter the logits, then rank.
            expect_inputs(inputs, 1, "noise:moe_gate");
            return eval_builtin(base, {add_noise(inputs[0], amp)}, ctx);
        }
        return add_noise(std::move(y), amp);
    }
    if (name == "nan") {
        require(parts.size() == 2, Errc::unknown_builtin, "nan:<base>");
        OutputPayload y = eval_builtin(parts[1], inputs, ctx);
        require(!y.values.empty(), Errc::invalid_value, "empty output");
        y.values[0] = std::numeric_limits<double>::quiet_NaN();
        return y;
    }
    if (name == "shape") {
        require(parts.size() == 2, Errc::unknown_builtin, "shape:<base>");
        OutputPayload y = eval_builtin(parts[1], inputs, ctx);
        // Transpose the declared shape without moving data: wrong layout.
        if (y.shape.size() >= 2) {
            std::swap(y.shape.front(), y.shape.back());
        } else {
            y.values.push_back(0.0);
            y.shape = {static_cast<std::int64_t>(y.values.size())};
        }
        return y;
    }

    fail(Errc::unknown_builtin, "unknown builtin '" + name + "'");
}

bool is_builtin(const std::string& spec) {
    auto parts = split(spec, ':');
    static const char* leaf[] = {"rmsnorm", "linear",  "opt_linear", "gelu",
                                 "softmax", "moe_gate", "mlp",        "block",
                                 "pipeline"};
    const std::string& name = parts[0];
    for (const char* l : leaf)
        if (name == l) return parts.size() == 1;
    if (name == "noise") return parts.size() == 3 && is_builtin(parts[1]);
    if (name == "nan" || name == "shape") return parts.size() == 2 && is_builtin(parts[1]);
    if (name == "crash" || name == "hang" || name == "segv")
        return (parts.size() == 2 && is_builtin(parts[1])) ||
               (parts.size() == 3 && is_builtin(parts[1]));
    if (name == "allreduce_ring" || name == "allreduce_identity") return parts.size() == 1;
    return false;
}

bool parse_builtin_locator(const std::string& locator, std::string& spec) {
    constexpr const char* prefix = "builtin:";
    if (locator.rfind(prefix, 0) != 0) return false;
    spec = locator.substr(std::string(prefix).size());
    return true;
}

}  // namespace fk
