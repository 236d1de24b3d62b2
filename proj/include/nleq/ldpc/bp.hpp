#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nleq/ldpc/code.hpp"

namespace nleq::ldpc {

/// Bound on |tanh product| inside the check update.
inline constexpr double kTanhProductMax = 1.0 - 1e-12;

/// Flooding-schedule message state: one c2v message per edge and the accumulated
/// check contribution l^U per variable.
struct BpState {
    std::vector<double> c2v;
    std::vector<double> u;

    static BpState zero(const Code& code) { return {std::vector<double>(code.edges(), 0.0), std::vector<double>(code.n(), 0.0)}; }
};

/// Quantities retained from one forward step for the adjoint pass.
struct BpStepRecord {
    enum Flag : std::uint8_t { v2c_clamped = 1, product_clamped = 2, c2v_clamped = 4 };

    std::vector<double> tanh_half;  // tanh(v2c / 2) per edge
    std::vector<double> product;    // extrinsic tanh product per edge (after clamping)
    std::vector<std::uint8_t> edge_flags;
    std::vector<std::uint8_t> out_clamped;  // per variable: l^B clamped
};

/// One full flooding iteration:
///   v2c = l^N + l^U - c2v_prev,  c2v = 2 atanh(prod_{others} tanh(v2c / 2)),
///   l^U = sum c2v,  l^B = l^U + l^N.
/// Updates `state` in place and writes l^B to `out`. When `record` is non-null it receives
/// what bp_step_backward needs.
void bp_step(const Code& code, BpState& state, std::span<const double> input, std::span<double> out,
             BpStepRecord* record = nullptr);

/// Adjoint of bp_step. On entry `d_state` holds the adjoints of the step's output state
/// (c2v and u) and `d_out` the adjoint of its l^B output; on exit `d_state` holds the adjoints
/// of the input state. The adjoint w.r.t. `input` is accumulated into `d_input`.
void bp_step_backward(const Code& code, const BpStepRecord& record, std::span<const double> d_out, BpState& d_state,
                      std::span<double> d_input);

struct DecodeOptions {
    int max_iterations = 50;
    bool early_exit = true;
};

struct DecodeResult {
    std::vector<double> llr;  // l^B after the last executed iteration
    std::vector<std::uint8_t> bits;
    bool converged = false;
    int iterations = 0;
};

/// Hard decision: bit = 1 iff llr < 0.
std::vector<std::uint8_t> hard_bits(std::span<const double> llr);

/// Runs bp_step up to max_iterations times from a zero state, stopping early on a zero syndrome.
DecodeResult decode(std::span<const double> llr, const Code& code, const DecodeOptions& opts = {});

}  // namespace nleq::ldpc
