#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nleq/chansim/link.hpp"
#include "nleq/ldpc/code.hpp"

namespace nleq::harness {

/// Maps demapper LLRs (codeword order) to the final decoder LLRs.
using Decoder = std::function<std::vector<double>(std::span<const double> lr)>;

Decoder bp_decoder(std::shared_ptr<const ldpc::Code> code, int iterations = 50);

/// Everything needed to simulate frames at one SNR point.
struct System {
    explicit System(chansim::Link l) : link(std::move(l)) {}

    chansim::Link link;
    chansim::Variant variant = chansim::Variant::a;
    chansim::SymbolEqualizer eq = chansim::identity_equalizer();
    double rho = 1.0;
    Decoder decoder;
};

/// One codeword carried by two real streams (I takes the even symbols, Q the odd ones).
struct CodedFrame {
    std::vector<std::uint8_t> codeword;
    std::vector<double> xhat;  // per symbol, codeword order
    std::vector<double> llr;   // per bit, codeword order
};

/// Frame `index` of the experiment stream `seed`: random info bits, encoding, channel, equalizer
/// and demapper. Bits and noise come from per-frame substreams, so the same frame sees the same
/// payload and the same normalised noise at every SNR and in every variant.
CodedFrame transmit_frame(const System& sys, const ldpc::Code& code, std::uint64_t seed, std::uint64_t index);

/// Mean squared equalizer error measured on random pilot blocks, turned into a demapper scale.
double calibrate_rho(const chansim::Link& link, chansim::Variant v, const chansim::SymbolEqualizer& eq,
                     std::uint64_t seed, std::size_t blocks = 8, std::size_t block_symbols = 2000);

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t frames = 0;
    std::uint64_t pre_bits = 0, pre_errors = 0;
    std::uint64_t post_bits = 0, post_errors = 0;
    std::uint64_t frame_errors = 0;

    double pre_ber() const { return pre_bits ? static_cast<double>(pre_errors) / static_cast<double>(pre_bits) : 0.0; }
    double post_ber() const
    {
        return post_bits ? static_cast<double>(post_errors) / static_cast<double>(post_bits) : 0.0;
    }
};

struct BerCurve {
    std::string label;
    std::vector<BerPoint> points;
};

struct WaterfallOptions {
    std::uint64_t frames_per_point = 2000;
    std::uint64_t min_errors = 100;  // post-BP bit errors before a point stops early
    std::uint64_t batch = 16;        // frames per scheduling round; stopping is checked between rounds
    bool stop_after_clean_point = true;
    std::uint64_t seed = 1;
};

using SystemFactory = std::function<System(double snr_db)>;

/// Frames inside a round run on OpenMP threads; counts are integers, so results do not depend on
/// the thread count.
BerCurve run_waterfall(const std::string& label, const SystemFactory& make, const ldpc::Code& code,
                       const std::vector<double>& snr_grid, const WaterfallOptions& opt);

/// Single-threaded reference.
BerCurve run_waterfall_serial(const std::string& label, const SystemFactory& make, const ldpc::Code& code,
                              const std::vector<double>& snr_grid, const WaterfallOptions& opt);

/// Linear interpolation of log10(post-BP BER) against SNR at the first downward crossing of
/// `target`. A point without errors is treated as half an error. Throws range_error if the curve
/// does not bracket the target.
double required_snr(const BerCurve& curve, double target_ber = 1e-4);

/// Same rule on raw (snr, ber) pairs.
double required_snr(const std::vector<std::pair<double, double>>& curve, double target_ber);

/// CSV with header label,snr_db,frames,pre_fec_bits,pre_fec_errors,pre_fec_ber,post_bp_bits,
/// post_bp_errors,post_bp_ber,frame_errors.
std::string curves_csv(const std::vector<BerCurve>& curves);

}  // namespace nleq::harness
