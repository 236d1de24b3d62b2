#include "nleq/harness/waterfall.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nleq/chansim/demapper.hpp"
#include "nleq/common.hpp"
#include "nleq/ldpc/bp.hpp"

namespace nleq::harness {

Decoder bp_decoder(std::shared_ptr<const ldpc::Code> code, int iterations)
{
    return [code, iterations](std::span<const double> lr) {
        return ldpc::decode(lr, *code, {iterations, true}).llr;
    };
}

CodedFrame transmit_frame(const System& sys, const ldpc::Code& code, std::uint64_t seed, std::uint64_t index)
{
    const auto& c = sys.link.constellation();
    const auto m = static_cast<std::size_t>(c.bits_per_symbol());
    if (code.n() % (2 * m) != 0)
        throw invalid_input("frame: code length must fill an even number of symbols");

    auto bit_rng = substream(seed, "frame-bits", index);
    std::vector<std::uint8_t> info(code.k());
    for (auto& b : info)
        b = static_cast<std::uint8_t>(bit_rng() & 1);
    CodedFrame f;
    f.codeword = code.encode(info);
    const auto x = chansim::map_bits(f.codeword, c);
    const std::size_t n_sym = x.size(), half = n_sym / 2;

    f.xhat.assign(n_sym, 0.0);
    std::vector<double> stream(half);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t i = 0; i < half; ++i)
            stream[i] = x[2 * i + s];
        auto noise_rng = substream(seed, "frame-noise", 2 * index + s);
        const auto block = sys.link.transmit(stream, noise_rng);
        const auto out = sys.link.equalize(block, sys.variant, sys.eq);
        for (std::size_t i = 0; i < half; ++i)
            f.xhat[2 * i + s] = out[i];
    }
    f.llr = chansim::soft_demap(f.xhat, c, sys.rho);
    return f;
}

double calibrate_rho(const chansim::Link& link, chansim::Variant v, const chansim::SymbolEqualizer& eq,
                     std::uint64_t seed, std::size_t blocks, std::size_t block_symbols)
{
    const double mse = chansim::measure_mse(link, v, eq, blocks, block_symbols, seed);
    if (!(mse > 0.0))
        return chansim::rho_for_variance(1e-6);
    return chansim::rho_for_variance(mse);
}

namespace {

struct FrameCounts {
    std::uint64_t pre_errors = 0, post_errors = 0, frame_error = 0;
};

FrameCounts run_frame(const System& sys, const ldpc::Code& code, std::uint64_t seed, std::uint64_t index)
{
    const auto f = transmit_frame(sys, code, seed, index);
    FrameCounts r;
    const auto hard = chansim::hard_decide(f.xhat, sys.link.constellation());
    for (std::size_t i = 0; i < hard.size(); ++i)
        r.pre_errors += hard[i] != f.codeword[i];
    const auto lb = sys.decoder(f.llr);
    const auto bits = ldpc::hard_bits(lb);
    for (int p : code.info_positions())
        r.post_errors += bits[static_cast<std::size_t>(p)] != f.codeword[static_cast<std::size_t>(p)];
    r.frame_error = r.post_errors > 0;
    return r;
}

template <bool Parallel>
BerCurve waterfall(const std::string& label, const SystemFactory& make, const ldpc::Code& code,
                   const std::vector<double>& snr_grid, const WaterfallOptions& opt)
{
    for (std::size_t i = 1; i < snr_grid.size(); ++i)
        if (!(snr_grid[i] > snr_grid[i - 1]))
            throw config_error("snr grid must be strictly increasing");
    if (opt.frames_per_point < 1 || opt.batch < 1)
        throw config_error("frames_per_point and batch must be positive");

    BerCurve curve;
    curve.label = label;
    for (double snr : snr_grid) {
        const System sys = make(snr);
        BerPoint pt;
        pt.snr_db = snr;
        std::vector<FrameCounts> round;
        while (pt.frames < opt.frames_per_point && pt.post_errors < opt.min_errors) {
            const std::uint64_t first = pt.frames;
            const std::uint64_t count = std::min(opt.batch, opt.frames_per_point - pt.frames);
            round.assign(count, {});
            if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
                for (std::int64_t j = 0; j < static_cast<std::int64_t>(count); ++j)
                    round[static_cast<std::size_t>(j)] = run_frame(sys, code, opt.seed, first + static_cast<std::uint64_t>(j));
            } else {
                for (std::uint64_t j = 0; j < count; ++j)
                    round[j] = run_frame(sys, code, opt.seed, first + j);
            }
            for (const auto& r : round) {
                pt.pre_errors += r.pre_errors;
                pt.post_errors += r.post_errors;
                pt.frame_errors += r.frame_error;
            }
            pt.frames += count;
        }
        pt.pre_bits = pt.frames * code.n();
        pt.post_bits = pt.frames * code.k();
        curve.points.push_back(pt);
        if (opt.stop_after_clean_point && pt.post_errors == 0)
            break;
    }
    return curve;
}

}  // namespace

BerCurve run_waterfall(const std::string& label, const SystemFactory& make, const ldpc::Code& code,
                       const std::vector<double>& snr_grid, const WaterfallOptions& opt)
{
    return waterfall<true>(label, make, code, snr_grid, opt);
}

BerCurve run_waterfall_serial(const std::string& label, const SystemFactory& make, const ldpc::Code& code,
                              const std::vector<double>& snr_grid, const WaterfallOptions& opt)
{
    return waterfall<false>(label, make, code, snr_grid, opt);
}

double required_snr(const std::vector<std::pair<double, double>>& curve, double target_ber)
{
    if (!(target_ber > 0.0 && target_ber < 0.5))
        throw config_error("target BER must lie in (0, 0.5)");
    if (curve.empty())
        throw range_error("required SNR: empty curve");
    if (curve.front().second <= target_ber)
        throw range_error("required SNR: BER is already below target at the lowest grid point " +
                          std::to_string(curve.front().first) + " dB; extend the grid downwards");
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto [s1, b1] = curve[i];
        if (b1 > target_ber)
            continue;
        const auto [s0, b0] = curve[i - 1];
        const double l0 = std::log10(b0), l1 = std::log10(b1), lt = std::log10(target_ber);
        if (l1 == l0)
            return s1;
        return s0 + (lt - l0) / (l1 - l0) * (s1 - s0);
    }
    throw range_error("required SNR: BER stays above target up to " + std::to_string(curve.back().first) +
                      " dB; extend the grid upwards");
}

double required_snr(const BerCurve& curve, double target_ber)
{
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curve.points) {
        if (p.post_bits == 0)
            continue;
        const double errors = p.post_errors ? static_cast<double>(p.post_errors) : 0.5;
        pts.emplace_back(p.snr_db, errors / static_cast<double>(p.post_bits));
    }
    try {
        return required_snr(pts, target_ber);
    } catch (const Error& e) {
        throw Error(e.kind(), curve.label + ": " + e.what());
    }
}

std::string curves_csv(const std::vector<BerCurve>& curves)
{
    std::ostringstream out;
    out << "label,snr_db,frames,pre_fec_bits,pre_fec_errors,pre_fec_ber,post_bp_bits,post_bp_errors,post_bp_ber,"
           "frame_errors\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    for (const auto& c : curves)
        for (const auto& p : c.points)
            out << c.label << ',' << num(p.snr_db) << ',' << p.frames << ',' << p.pre_bits << ',' << p.pre_errors
                << ',' << num(p.pre_ber()) << ',' << p.post_bits << ',' << p.post_errors << ',' << num(p.post_ber())
                << ',' << p.frame_errors << '\n';
    return out.str();
}

}  // namespace nleq::harness
