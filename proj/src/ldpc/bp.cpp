#include "nleq/ldpc/bp.hpp"

#include <algorithm>
#include <cmath>

#include "nleq/common.hpp"

namespace nleq::ldpc {

namespace {

std::size_t max_check_degree(const Code& code)
{
    std::size_t d = 0;
    for (std::size_t c = 0; c < code.checks(); ++c)
        d = std::max(d, code.check_begin(c + 1) - code.check_begin(c));
    return d;
}

}  // namespace

void bp_step(const Code& code, BpState& state, std::span<const double> input, std::span<double> out,
             BpStepRecord* record)
{
    const std::size_t n = code.n();
    const std::size_t n_edges = code.edges();
    auto& c2v = state.c2v;
    auto& u = state.u;

    if (record) {
        record->tanh_half.resize(n_edges);
        record->product.resize(n_edges);
        record->edge_flags.assign(n_edges, 0);
        record->out_clamped.assign(n, 0);
    }

    // variable-to-check, stored in place of c2v's tanh argument
    std::vector<double> t(n_edges);
    for (std::size_t v = 0; v < n; ++v) {
        const double base = input[v] + u[v];
        for (int e : code.var_edges(v)) {
            const double raw = base - c2v[e];
            const double msg = clamp_llr(raw);
            if (record && msg != raw)
                record->edge_flags[e] |= BpStepRecord::v2c_clamped;
            t[e] = std::tanh(0.5 * msg);
        }
    }

    std::vector<double> prefix(max_check_degree(code) + 1);
    for (std::size_t c = 0; c < code.checks(); ++c) {
        const std::size_t b = code.check_begin(c);
        const std::size_t d = code.check_begin(c + 1) - b;
        prefix[0] = 1.0;
        for (std::size_t i = 0; i < d; ++i)
            prefix[i + 1] = prefix[i] * t[b + i];
        double suffix = 1.0;
        for (std::size_t i = d; i-- > 0;) {
            double p = prefix[i] * suffix;
            suffix *= t[b + i];
            std::uint8_t flags = 0;
            if (p > kTanhProductMax) {
                p = kTanhProductMax;
                flags |= BpStepRecord::product_clamped;
            } else if (p < -kTanhProductMax) {
                p = -kTanhProductMax;
                flags |= BpStepRecord::product_clamped;
            }
            const double raw = 2.0 * std::atanh(p);
            const double msg = clamp_llr(raw);
            if (msg != raw)
                flags |= BpStepRecord::c2v_clamped;
            c2v[b + i] = msg;
            if (record) {
                record->product[b + i] = p;
                record->edge_flags[b + i] |= flags;
            }
        }
    }
    if (record)
        record->tanh_half = std::move(t);

    for (std::size_t v = 0; v < n; ++v) {
        double acc = 0.0;
        for (int e : code.var_edges(v))
            acc += c2v[e];
        u[v] = acc;
        const double raw = acc + input[v];
        const double lb = clamp_llr(raw);
        if (record && lb != raw)
            record->out_clamped[v] = 1;
        out[v] = lb;
    }
}

void bp_step_backward(const Code& code, const BpStepRecord& record, std::span<const double> d_out, BpState& d_state,
                      std::span<double> d_input)
{
    const std::size_t n = code.n();
    const std::size_t n_edges = code.edges();
    auto& d_c2v = d_state.c2v;
    auto& d_u = d_state.u;

    // l^B = l^U + l^N
    for (std::size_t v = 0; v < n; ++v) {
        if (!record.out_clamped[v]) {
            d_u[v] += d_out[v];
            d_input[v] += d_out[v];
        }
    }
    // l^U = sum of c2v
    for (std::size_t v = 0; v < n; ++v)
        for (int e : code.var_edges(v))
            d_c2v[e] += d_u[v];

    // c2v = 2 atanh(P): dP
    std::vector<double> d_p(n_edges, 0.0);
    for (std::size_t e = 0; e < n_edges; ++e) {
        if (record.edge_flags[e] & (BpStepRecord::product_clamped | BpStepRecord::c2v_clamped))
            continue;
        const double p = record.product[e];
        d_p[e] = d_c2v[e] * 2.0 / (1.0 - p * p);
    }

    // P_i = prod_{j != i} t_j: dt_a = sum_{i != a} dP_i prod_{j not in {i,a}} t_j
    std::vector<double> d_t(n_edges, 0.0);
    std::vector<double> vals, weights, pre;
    const auto& t = record.tanh_half;
    for (std::size_t c = 0; c < code.checks(); ++c) {
        const std::size_t b = code.check_begin(c);
        const std::size_t d = code.check_begin(c + 1) - b;
        for (std::size_t a = 0; a < d; ++a) {
            vals.clear();
            weights.clear();
            for (std::size_t i = 0; i < d; ++i) {
                if (i == a)
                    continue;
                vals.push_back(t[b + i]);
                weights.push_back(d_p[b + i]);
            }
            pre.assign(vals.size() + 1, 1.0);
            for (std::size_t i = 0; i < vals.size(); ++i)
                pre[i + 1] = pre[i] * vals[i];
            double suffix = 1.0, acc = 0.0;
            for (std::size_t i = vals.size(); i-- > 0;) {
                acc += weights[i] * pre[i] * suffix;
                suffix *= vals[i];
            }
            d_t[b + a] = acc;
        }
    }

    // v2c = l^N + l^U_prev - c2v_prev, t = tanh(v2c / 2)
    std::fill(d_u.begin(), d_u.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        for (int e : code.var_edges(v)) {
            double g = 0.0;
            if (!(record.edge_flags[e] & BpStepRecord::v2c_clamped))
                g = d_t[e] * 0.5 * (1.0 - t[e] * t[e]);
            d_input[v] += g;
            d_u[v] += g;
            d_c2v[e] = -g;
        }
    }
}

std::vector<std::uint8_t> hard_bits(std::span<const double> llr)
{
    std::vector<std::uint8_t> bits(llr.size());
    for (std::size_t i = 0; i < llr.size(); ++i)
        bits[i] = llr[i] < 0.0 ? 1 : 0;
    return bits;
}

DecodeResult decode(std::span<const double> llr, const Code& code, const DecodeOptions& opts)
{
    if (opts.max_iterations < 1)
        throw invalid_input("decode: need at least one iteration");
    if (llr.size() != code.n())
        throw invalid_input("decode: LLR length does not match the code");
    DecodeResult res;
    res.llr.assign(code.n(), 0.0);
    auto state = BpState::zero(code);
    for (int it = 0; it < opts.max_iterations; ++it) {
        bp_step(code, state, llr, res.llr);
        res.iterations = it + 1;
        if (opts.early_exit) {
            res.bits = hard_bits(res.llr);
            if (code.syndrome(res.bits)) {
                res.converged = true;
                return res;
            }
        }
    }
    res.bits = hard_bits(res.llr);
    res.converged = code.syndrome(res.bits);
    return res;
}

}  // namespace nleq::ldpc
