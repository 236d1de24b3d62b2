#include "nleq/chansim/link.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nleq/chansim/demapper.hpp"

namespace nleq::chansim {

Variant parse_variant(std::string_view name)
{
    if (name == "a")
        return Variant::a;
    if (name == "b")
        return Variant::b;
    if (name == "c")
        return Variant::c;
    throw invalid_input("unknown system variant '" + std::string(name) + "'");
}

SymbolEqualizer identity_equalizer()
{
    return [](std::span<const double> y, std::size_t first, std::span<double> out) {
        std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(first), out.size(), out.begin());
    };
}

std::vector<double> ReceivedBlock::observed() const
{
    std::vector<double> y(signal.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = signal[i] + noise[i];
    return y;
}

std::size_t default_guard(const ChannelConfig& cfg, int memory)
{
    return static_cast<std::size_t>(std::max(2 * memory, cfg.rrc_span_symbols / 2));
}

Link::Link(const ChannelConfig& cfg, std::size_t guard_symbols)
    : cfg_(cfg), constellation_(Constellation::pam8_gray()), rx_(cfg), guard_(guard_symbols)
{
    cfg_.validate();
    if (std::isfinite(cfg_.nl_amplitude)) {
        // fixed stream: the reference depends on the channel only
        auto ref_rng = substream(0, "signal-power");
        const auto ref = random_symbols(1 << 16, ref_rng);
        const auto mf = rx_.matched_filter(channel_output(ref));
        double acc = 0.0;
        for (std::size_t n = 0; n < ref.size(); ++n) {
            const double v = mf[static_cast<std::size_t>(cfg_.sps) * (guard_ + n)];
            acc += v * v;
        }
        signal_power_ = acc / static_cast<double>(ref.size());
    }
    auto pilot_rng = substream(cfg_.seed, "pilot-symbols");
    auto noise_rng = substream(cfg_.seed, "pilot-noise");
    const auto pilots = random_symbols(static_cast<std::size_t>(cfg_.pilot_symbols), pilot_rng);
    auto received = add_awgn(channel_output(pilots), effective_snr_db(), noise_rng);
    rx_ = LinearReceiver::fit(cfg_, received, pilots, guard_);
}

double Link::effective_snr_db() const
{
    return cfg_.snr_db - 10.0 * std::log10(signal_power_);
}

double Link::noise_variance() const
{
    const double s = noise_sigma(effective_snr_db());
    return s * s;
}

Link Link::at_snr(double snr_db) const
{
    Link copy = *this;
    copy.cfg_.snr_db = snr_db;
    return copy;
}

FrameSignal Link::channel_output(std::span<const double> data) const
{
    std::vector<double> padded(data.size() + 2 * guard_, 0.0);
    std::copy(data.begin(), data.end(), padded.begin() + static_cast<std::ptrdiff_t>(guard_));
    return apply_nonlinearity(rrc_shape(padded, cfg_), cfg_.nl_amplitude);
}

ReceivedBlock Link::transmit(std::span<const double> data, Rng& noise_rng) const
{
    const auto tx = channel_output(data);
    const auto noise = awgn(tx.samples.size(), tx.sps, effective_snr_db(), noise_rng);
    ReceivedBlock block;
    block.guard = guard_;
    block.data = data.size();
    block.signal = rx_.receive(tx);
    block.noise = rx_.receive(noise);
    return block;
}

std::vector<double> Link::equalize(const ReceivedBlock& block, Variant v, const SymbolEqualizer& eq) const
{
    std::vector<double> xhat(block.data);
    switch (v) {
    case Variant::a:
        eq(block.observed(), block.guard, xhat);
        break;
    case Variant::c:
        eq(block.signal, block.guard, xhat);
        for (std::size_t n = 0; n < xhat.size(); ++n)
            xhat[n] += block.noise[block.guard + n];
        break;
    case Variant::b:
        throw invalid_input("variant b is an analytical model and is not simulated");
    }
    return xhat;
}

std::vector<double> Link::random_symbols(std::size_t n, Rng& rng) const
{
    const auto levels = constellation_.levels();
    std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
    std::vector<double> x(n);
    for (double& v : x)
        v = levels[pick(rng)];
    return x;
}

VariantOutput run_variant(Variant v, const Link& link, std::span<const std::uint8_t> bits, const SymbolEqualizer& eq,
                          double rho, Rng& noise_rng)
{
    if (v == Variant::b)
        throw invalid_input("variant b is an analytical model and is not simulated");
    const auto x = map_bits(bits, link.constellation());
    const auto block = link.transmit(x, noise_rng);
    VariantOutput out;
    out.xhat = link.equalize(block, v, eq);
    out.llr = soft_demap(out.xhat, link.constellation(), rho);
    return out;
}

double measure_mse(const Link& link, Variant v, const SymbolEqualizer& eq, std::size_t n_blocks,
                   std::size_t block_symbols, std::uint64_t seed)
{
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        auto sym_rng = substream(seed, "mse-symbols", b);
        auto noise_rng = substream(seed, "mse-noise", b);
        const auto x = link.random_symbols(block_symbols, sym_rng);
        const auto xhat = link.equalize(link.transmit(x, noise_rng), v, eq);
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double e = xhat[n] - x[n];
            acc += e * e;
        }
        count += x.size();
    }
    return acc / static_cast<double>(count);
}

}  // namespace nleq::chansim
