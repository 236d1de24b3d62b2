#include "nleq/chansim/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace nleq::chansim {

void ChannelConfig::validate() const
{
    if (sps < 2)
        throw config_error("channel: sps must be >= 2");
    if (!(rolloff > 0.0 && rolloff < 1.0))
        throw config_error("channel: rolloff must lie in (0, 1)");
    if (rrc_span_symbols < 8 || rrc_span_symbols % 2 != 0)
        throw config_error("channel: rrc span must be an even number >= 8");
    if (!(nl_amplitude > 0.0))
        throw config_error("channel: nl_amplitude must be > 0");
    if (fir_len < 1 || fir_len % 2 == 0)
        throw config_error("channel: fir_len must be odd");
    if (pilot_symbols < 10 * fir_len)
        throw config_error("channel: pilot block must hold at least 10 x fir_len symbols");
}

std::vector<double> rrc_taps(int sps, double rolloff, int span_symbols)
{
    const int half = span_symbols * sps / 2;
    std::vector<double> taps(2 * half + 1);
    const double b = rolloff;
    const double pi = std::numbers::pi;
    for (int i = -half; i <= half; ++i) {
        const double t = static_cast<double>(i) / sps;
        double h;
        if (i == 0) {
            h = 1.0 - b + 4.0 * b / pi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
            h = b / std::sqrt(2.0) *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        } else {
            const double x = 4.0 * b * t;
            h = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
                (pi * t * (1.0 - x * x));
        }
        taps[i + half] = h;
    }
    double energy = 0.0;
    for (double v : taps)
        energy += v * v;
    const double norm = 1.0 / std::sqrt(energy);
    for (double& v : taps)
        v *= norm;
    return taps;
}

FrameSignal rrc_shape(std::span<const double> symbols, const ChannelConfig& cfg)
{
    const auto taps = rrc_taps(cfg.sps, cfg.rolloff, cfg.rrc_span_symbols);
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    FrameSignal out;
    out.sps = cfg.sps;
    out.n_symbols = symbols.size();
    out.samples.assign(symbols.size() * cfg.sps, 0.0);
    const auto len = static_cast<std::ptrdiff_t>(out.samples.size());
    for (std::size_t n = 0; n < symbols.size(); ++n) {
        const double x = symbols[n];
        if (x == 0.0)
            continue;
        const auto centre = static_cast<std::ptrdiff_t>(n) * cfg.sps;
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(taps.size()); ++j) {
            const auto pos = centre + j - half;
            if (pos >= 0 && pos < len)
                out.samples[pos] += x * taps[j];
        }
    }
    return out;
}

std::vector<double> filter_same(std::span<const double> in, std::span<const double> taps)
{
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto len = static_cast<std::ptrdiff_t>(in.size());
    const auto ntaps = static_cast<std::ptrdiff_t>(taps.size());
    std::vector<double> out(in.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < len; ++i) {
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, i + half - len + 1);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(ntaps - 1, i + half);
        double acc = 0.0;
        for (std::ptrdiff_t j = j_lo; j <= j_hi; ++j)
            acc += taps[j] * in[i - j + half];
        out[i] = acc;
    }
    return out;
}

FrameSignal apply_nonlinearity(FrameSignal s, double amplitude)
{
    if (!(amplitude > 0.0))
        throw invalid_input("apply_nonlinearity: amplitude must be > 0");
    if (std::isinf(amplitude))
        return s;
    for (double& u : s.samples)
        u = amplitude * std::sin(u / amplitude);
    return s;
}

double noise_sigma(double snr_db)
{
    if (std::isinf(snr_db) && snr_db > 0)
        return 0.0;
    return std::sqrt(std::pow(10.0, -snr_db / 10.0));
}

FrameSignal awgn(std::size_t n_samples, int sps, double snr_db, Rng& rng)
{
    FrameSignal out;
    out.sps = sps;
    out.n_symbols = n_samples / static_cast<std::size_t>(sps);
    out.samples.assign(n_samples, 0.0);
    const double sigma = noise_sigma(snr_db);
    if (sigma == 0.0)
        return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out.samples)
        v = sigma * normal(rng);
    return out;
}

FrameSignal add_awgn(FrameSignal s, double snr_db, Rng& rng)
{
    const auto noise = awgn(s.samples.size(), s.sps, snr_db, rng);
    for (std::size_t i = 0; i < s.samples.size(); ++i)
        s.samples[i] += noise.samples[i];
    return s;
}

}  // namespace nleq::chansim
