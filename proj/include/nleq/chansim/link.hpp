#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "nleq/chansim/channel.hpp"
#include "nleq/chansim/constellation.hpp"
#include "nleq/chansim/receiver.hpp"

namespace nleq::chansim {

/// System variants: a = full chain, b = analytical model (noise after the linear filter; not
/// simulated), c = noise removed before the equalizer and re-added after it.
enum class Variant { a, b, c };

Variant parse_variant(std::string_view name);

/// Writes equalized amplitudes for out.size() symbols starting at y[first]; may read the
/// neighbourhood of that range.
using SymbolEqualizer = std::function<void(std::span<const double> y, std::size_t first, std::span<double> out)>;

SymbolEqualizer identity_equalizer();

/// Linear-filter output of one block, split into its signal and noise parts.
/// Both vectors cover guard + data + guard symbols.
struct ReceivedBlock {
    std::vector<double> signal;
    std::vector<double> noise;
    std::size_t guard = 0;
    std::size_t data = 0;

    /// signal + noise (what the receiver actually observes).
    std::vector<double> observed() const;
};

/// Transmitter, channel and linear receiver with the FIR adapted on a pilot block at cfg.snr_db.
class Link {
public:
    Link(const ChannelConfig& cfg, std::size_t guard_symbols);

    const ChannelConfig& config() const noexcept { return cfg_; }
    const Constellation& constellation() const noexcept { return constellation_; }
    const LinearReceiver& receiver() const noexcept { return rx_; }
    std::size_t guard() const noexcept { return guard_; }

    /// Noise-free matched-filter output power at the symbol instants; 1 without nonlinearity.
    /// The SNR is referred to this power.
    double signal_power() const noexcept { return signal_power_; }
    /// Per-sample channel noise variance at the operating SNR.
    double noise_variance() const;

    /// Same transmitter and adapted receiver, operated at another SNR.
    Link at_snr(double snr_db) const;

    /// Noise-free channel output (Tx RRC then nonlinearity) for guard-padded `data`.
    FrameSignal channel_output(std::span<const double> data) const;

    /// Sends `data` (zero guard symbols added on both sides) through channel and receiver.
    ReceivedBlock transmit(std::span<const double> data, Rng& noise_rng) const;

    /// Equalizer output for the data symbols of `block` under the given variant.
    std::vector<double> equalize(const ReceivedBlock& block, Variant v, const SymbolEqualizer& eq) const;

    /// Random constellation points.
    std::vector<double> random_symbols(std::size_t n, Rng& rng) const;

private:
    double effective_snr_db() const;

    ChannelConfig cfg_;
    Constellation constellation_;
    LinearReceiver rx_;
    std::size_t guard_;
    double signal_power_ = 1.0;
};

/// Guard length used throughout: enough for a +-memory window and the RRC tails.
std::size_t default_guard(const ChannelConfig& cfg, int memory);

struct VariantOutput {
    std::vector<double> xhat;
    std::vector<double> llr;
};

/// One block of coded bits through variant a or c. Variant b throws invalid_input.
VariantOutput run_variant(Variant v, const Link& link, std::span<const std::uint8_t> bits, const SymbolEqualizer& eq,
                          double rho, Rng& noise_rng);

/// Mean squared error of the equalizer output against the transmitted symbols, over
/// `n_blocks` random blocks of `block_symbols` symbols drawn from substreams of `seed`.
double measure_mse(const Link& link, Variant v, const SymbolEqualizer& eq, std::size_t n_blocks,
                   std::size_t block_symbols, std::uint64_t seed);

}  // namespace nleq::chansim
