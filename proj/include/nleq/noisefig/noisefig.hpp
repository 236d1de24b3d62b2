#pragma once

#include <Eigen/Dense>

#include "nleq/chansim/link.hpp"
#include "nleq/volterra/volterra.hpp"

namespace nleq::noisefig {

/// Noise-free statistics of the linear-filter output w.
struct SignalMoments {
    Eigen::MatrixXd sigma_w11;  // E[w1^T w1], (2L+1) x (2L+1)
    Eigen::MatrixXd sigma_w13;  // E[w1^T w3], (2L+1) x |Z|
    double ew2 = 0.0;           // mean diagonal of sigma_w11
    double ez2 = 0.0;           // noise power at the linear-filter output
    std::size_t samples = 0;
};

/// Moments from a symbol-rate signal sequence; windows centred on [first, first + count).
/// Throws invalid_input when count < 100 * feature dimension.
SignalMoments moments_from_sequence(std::span<const double> w, std::size_t first, std::size_t count,
                                    const volterra::IndexSet& iset, double ez2);

/// Moments of the noise-free output of `link` over random blocks; ez2 follows the link's SNR.
SignalMoments estimate_moments(const chansim::Link& link, int memory, std::size_t n_blocks,
                               std::size_t block_symbols, std::uint64_t seed);

/// alpha_{i,j} for L >= i >= j >= -L, indexed [i+L][j+L]. Third-order weights with an
/// index triple that is not non-increasing count as zero.
Eigen::MatrixXd alpha(const volterra::VolterraModel& model);

/// Noise figure (linear) of a Volterra model under white noise added after the linear filter,
/// first order in h3:
///   F = E[w^2] (|h1|^2 + 2 sum_{i>=j} alpha_ij S11_ij) / (h1' S11 h1 + 2 h1' S13 h3).
/// Throws numerical_error when the denominator is not positive.
double noise_figure(const volterra::VolterraModel& model, const SignalMoments& mom);

/// Paired noisy / noise-free pass through an equalizer at the link's SNR.
struct OutputSnr {
    double ps = 0.0;   // E[xhat_S^2]
    double pn = 0.0;   // E[(xhat - xhat_S)^2]
    double ew2 = 0.0;  // E[w^2]
    double ez2 = 0.0;  // E[z^2]

    /// (ew2 / ez2) / (ps / pn).
    double noise_figure() const { return (ew2 / ez2) / (ps / pn); }
};

OutputSnr empirical_output_snr(const chansim::Link& link, const chansim::SymbolEqualizer& eq, std::size_t n_blocks,
                               std::size_t block_symbols, std::uint64_t seed);

struct PenaltyReport {
    double train_snr_db = 0.0;
    double ne_penalty_db = 0.0;
    double nl_penalty_db = 0.0;
    double total_db = 0.0;
    double nf_db = 0.0;
};

/// NL = req(c) - req(no nonlinearity), NE = req(a) - req(c), total = NE + NL.
PenaltyReport penalty_report(double train_snr_db, double req_baseline_db, double req_c_db, double req_a_db,
                             double nf_db);

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace nleq::noisefig
