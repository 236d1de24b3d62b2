#pragma once

#include <span>
#include <vector>

#include "nleq/chansim/channel.hpp"

namespace nleq::chansim {

/// Rx RRC followed by a fractionally spaced FIR (sps in, 1 out).
class LinearReceiver {
public:
    /// Pass-through FIR (single centre tap of 1).
    explicit LinearReceiver(const ChannelConfig& cfg);

    /// Block least-squares FIR fit: symbols [first_symbol, first_symbol + pilots.size()) of `received` are the
    /// known pilots. Ridge term 1e-8 * trace(R) / dim on the normal matrix.
    static LinearReceiver fit(const ChannelConfig& cfg, const FrameSignal& received, std::span<const double> pilots,
                              std::size_t first_symbol = 0);

    /// Rx RRC output at cfg.sps.
    std::vector<double> matched_filter(const FrameSignal& s) const;

    /// FIR stage applied to a matched-filter output; returns one value per symbol.
    std::vector<double> equalize(std::span<const double> mf, std::size_t n_symbols) const;

    /// matched_filter then equalize.
    std::vector<double> receive(const FrameSignal& s) const;

    std::span<const double> fir() const noexcept { return fir_; }

    /// Sum of squares of the composite (Rx RRC * FIR) impulse response. White per-sample noise of
    /// variance s^2 leaves the receiver with variance s^2 * noise_gain().
    double noise_gain() const;

    /// Composite response to a single transmitted symbol through Tx RRC, Rx RRC and the FIR,
    /// sampled at symbol spacing; index `span` is the cursor.
    std::vector<double> symbol_response(int span) const;

private:
    ChannelConfig cfg_;
    std::vector<double> rx_taps_;
    std::vector<double> fir_;
};

/// Fits the FIR on the leading pilot block of `s` and returns y_n for every symbol of `s`.
std::vector<double> linear_receive(const FrameSignal& s, const ChannelConfig& cfg, std::span<const double> pilots);

}  // namespace nleq::chansim
