#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nleq/chansim/link.hpp"

namespace nleq::volterra {

struct Triple {
    int i, j, k;
    bool operator==(const Triple&) const = default;
};

/// Third-order delay triples (i, j, k) with L >= i >= j >= k >= -L.
struct IndexSet {
    int memory = 0;
    std::vector<Triple> triples;

    std::size_t linear_size() const noexcept { return static_cast<std::size_t>(2 * memory + 1); }
    std::size_t cubic_size() const noexcept { return triples.size(); }
    std::size_t dim() const noexcept { return linear_size() + cubic_size(); }
};

/// Ordering: i descending from L, then j descending from i, then k descending from j.
/// Throws invalid_input for L < 0.
IndexSet build_index_set(int memory);

/// C(2L+3, 3).
std::size_t index_set_size(int memory);

/// y1[i+L] = y[n+i], y3[t] = y[n+i] y[n+j] y[n+k]. Throws range_error if the window leaves y.
void build_features(std::span<const double> y, std::size_t n, const IndexSet& iset, std::span<double> y1,
                    std::span<double> y3);

struct Features {
    std::vector<double> y1, y3;
};
Features build_features(std::span<const double> y, std::size_t n, const IndexSet& iset);

struct VolterraModel {
    IndexSet iset;
    std::vector<double> h1, h3;
    double train_snr_db = kInf;

    int memory() const noexcept { return iset.memory; }
    /// h1 = e0, h3 = 0.
    static VolterraModel pass_through(int memory);
};

/// Second-moment statistics of (features, target) accumulated over training symbols.
/// Blocks are chunked into feature matrices and folded in with rank-k updates.
class GramAccumulator {
public:
    explicit GramAccumulator(const IndexSet& iset);

    /// Adds the symbols y[first .. first + x.size()) with targets x.
    void add(std::span<const double> y, std::size_t first, std::span<const double> x);
    void merge(const GramAccumulator& other);

    const IndexSet& index_set() const noexcept { return iset_; }
    std::size_t count() const noexcept { return count_; }
    /// Full symmetric Gram sum_n f_n f_n^T (unnormalised).
    Eigen::MatrixXd gram() const;
    const Eigen::VectorXd& cross() const noexcept { return cross_; }
    double target_energy() const noexcept { return xx_; }

private:
    IndexSet iset_;
    Eigen::MatrixXd gram_;  // lower triangle valid
    Eigen::VectorXd cross_;
    double xx_ = 0.0;
    std::size_t count_ = 0;
};

/// Solves the normal equations with ridge 1e-8 trace/dim followed by iterative refinement
/// against the unregularised system. Throws numerical_error if the factorisation fails.
VolterraModel fit_mmse(const GramAccumulator& acc);

/// Matrix form: rows of Y1 / Y3 are feature vectors, x the targets.
VolterraModel fit_mmse(const IndexSet& iset, const Eigen::MatrixXd& Y1, const Eigen::MatrixXd& Y3,
                       const Eigen::VectorXd& x);

/// out[t] = model output at symbol first + t.
void apply(const VolterraModel& model, std::span<const double> y, std::size_t first, std::span<double> out);

/// Output at every n with a complete window; the L edge samples on each side are copied from y.
std::vector<double> apply(const VolterraModel& model, std::span<const double> y);

chansim::SymbolEqualizer as_equalizer(const VolterraModel& model);

/// E[w^2] |h3| / |h1| with Euclidean norms.
double nonlinearity_ratio(const VolterraModel& model, double ew2);

struct TrainOptions {
    int memory = 4;
    std::size_t n_blocks = 100;
    std::size_t block_symbols = 2000;
    std::uint64_t seed = 1;
};

/// Gram statistics of variant-a training data from `link` (operated at its own SNR).
/// Blocks are spread over OpenMP threads; per-slot partial sums are merged in a fixed order,
/// so the result does not depend on the thread count.
GramAccumulator collect_training(const chansim::Link& link, const TrainOptions& opt);

/// Single-threaded reference for collect_training.
GramAccumulator collect_training_serial(const chansim::Link& link, const TrainOptions& opt);

/// Builds a link whose FIR is adapted at snr_db, fits the Volterra weights on its output.
VolterraModel train_at_snr(const chansim::ChannelConfig& cfg, double snr_db, const TrainOptions& opt);

/// Plain-text weights: header "volterra L train_snr_db", then h1 and h3, one value per line.
void write_model(const VolterraModel& model, const std::string& path);
VolterraModel read_model(const std::string& path);

}  // namespace nleq::volterra
