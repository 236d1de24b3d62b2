#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nleq/common.hpp"
#include "nleq/rng.hpp"

namespace nleq::chansim {

struct ChannelConfig {
    int sps = 2;
    double rolloff = 0.2;
    int rrc_span_symbols = 40;
    /// Scale A of the sinusoidal transfer u -> A sin(u/A); kInf disables the nonlinearity.
    double nl_amplitude = kInf;
    /// SNR at the symbol-rate linear-filter output; kInf means noiseless.
    double snr_db = kInf;
    int fir_len = 17;
    int pilot_symbols = 4096;
    std::uint64_t seed = 1;

    /// Throws config error on violated invariants.
    void validate() const;
};

/// Waveform at `sps` samples per symbol; sample n*sps is aligned with symbol n.
struct FrameSignal {
    std::vector<double> samples;
    int sps = 2;
    std::size_t n_symbols = 0;
};

/// Unit-energy root-raised-cosine taps, length span*sps + 1, centred.
std::vector<double> rrc_taps(int sps, double rolloff, int span_symbols);

/// Upsamples to cfg.sps and filters with the Tx RRC (centred, length n_symbols*sps).
FrameSignal rrc_shape(std::span<const double> symbols, const ChannelConfig& cfg);

/// Centred ("same"-length) FIR filtering of a sample stream.
std::vector<double> filter_same(std::span<const double> in, std::span<const double> taps);

/// Memoryless u -> A sin(u/A). A = kInf returns the input unchanged.
FrameSignal apply_nonlinearity(FrameSignal s, double amplitude);

/// Per-sample noise standard deviation for the SNR convention (unit-energy RRC, unit-power symbols).
double noise_sigma(double snr_db);

/// Noise-only waveform: i.i.d. N(0, sigma^2) per sample. Noiseless SNR yields zeros without
/// consuming the generator. Standard normals are drawn in sample order, so one generator state
/// produces the same realisation (scaled) for every SNR.
FrameSignal awgn(std::size_t n_samples, int sps, double snr_db, Rng& rng);

/// s + awgn(...).
FrameSignal add_awgn(FrameSignal s, double snr_db, Rng& rng);

}  // namespace nleq::chansim
