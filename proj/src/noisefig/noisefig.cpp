#include "nleq/noisefig/noisefig.hpp"

#include <map>
#include <tuple>

#include "nleq/common.hpp"

namespace nleq::noisefig {

SignalMoments moments_from_sequence(std::span<const double> w, std::size_t first, std::size_t count,
                                    const volterra::IndexSet& iset, double ez2)
{
    if (count < 100 * iset.dim())
        throw invalid_input("noisefig: need at least 100 samples per moment dimension");
    volterra::GramAccumulator acc(iset);
    acc.add(w, first, w.subspan(first, count));
    const auto l1 = static_cast<Eigen::Index>(iset.linear_size());
    const Eigen::MatrixXd g = acc.gram() / static_cast<double>(count);
    SignalMoments m;
    m.sigma_w11 = g.topLeftCorner(l1, l1);
    m.sigma_w13 = g.topRightCorner(l1, g.cols() - l1);
    m.ew2 = m.sigma_w11.trace() / static_cast<double>(l1);
    m.ez2 = ez2;
    m.samples = count;
    return m;
}

SignalMoments estimate_moments(const chansim::Link& link, int memory, std::size_t n_blocks,
                               std::size_t block_symbols, std::uint64_t seed)
{
    const auto iset = volterra::build_index_set(memory);
    if (n_blocks * block_symbols < 100 * iset.dim())
        throw invalid_input("noisefig: need at least 100 samples per moment dimension");
    if (link.guard() < static_cast<std::size_t>(memory))
        throw invalid_input("noisefig: link guard is shorter than the window");
    volterra::GramAccumulator acc(iset);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        auto rng = substream(seed, "moments-symbols", b);
        const auto x = link.random_symbols(block_symbols, rng);
        const auto w = link.receiver().receive(link.channel_output(x));
        acc.add(w, link.guard(), std::span<const double>(w).subspan(link.guard(), x.size()));
    }
    const auto l1 = static_cast<Eigen::Index>(iset.linear_size());
    const Eigen::MatrixXd g = acc.gram() / static_cast<double>(acc.count());
    SignalMoments m;
    m.sigma_w11 = g.topLeftCorner(l1, l1);
    m.sigma_w13 = g.topRightCorner(l1, g.cols() - l1);
    m.ew2 = m.sigma_w11.trace() / static_cast<double>(l1);
    m.ez2 = link.noise_variance() * link.receiver().noise_gain();
    m.samples = acc.count();
    return m;
}

Eigen::MatrixXd alpha(const volterra::VolterraModel& model)
{
    const int L = model.memory();
    const auto& tr = model.iset.triples;
    std::map<std::tuple<int, int, int>, double> h3;
    for (std::size_t t = 0; t < tr.size(); ++t)
        h3[{tr[t].i, tr[t].j, tr[t].k}] = model.h3[t];
    auto at = [&](int i, int j, int k) {
        const auto it = h3.find({i, j, k});
        return it == h3.end() ? 0.0 : it->second;
    };
    auto h1 = [&](int k) { return model.h1[static_cast<std::size_t>(k + L)]; };

    const int w = 2 * L + 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(w, w);
    for (int i = -L; i <= L; ++i)
        for (int j = -L; j <= i; ++j) {
            double s = 0.0;
            for (int k = -L; k <= j; ++k)
                s += h1(k) * at(i, j, k);
            for (int k = -L; k <= i; ++k)
                s += h1(k) * at(i, k, j);
            for (int k = -L; k <= L; ++k)
                s += h1(k) * at(k, i, j);
            a(i + L, j + L) = s;
        }
    return a;
}

double noise_figure(const volterra::VolterraModel& model, const SignalMoments& mom)
{
    const auto l1 = static_cast<Eigen::Index>(model.iset.linear_size());
    const auto l3 = static_cast<Eigen::Index>(model.iset.cubic_size());
    if (mom.sigma_w11.rows() != l1 || mom.sigma_w11.cols() != l1 || mom.sigma_w13.rows() != l1 ||
        mom.sigma_w13.cols() != l3)
        throw invalid_input("noisefig: moment dimensions do not match the model");
    const Eigen::Map<const Eigen::VectorXd> h1(model.h1.data(), l1), h3(model.h3.data(), l3);

    const Eigen::MatrixXd a = alpha(model);
    double num = h1.squaredNorm();
    for (Eigen::Index i = 0; i < l1; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            num += 2.0 * a(i, j) * mom.sigma_w11(i, j);
    const double den = h1.dot(mom.sigma_w11 * h1) + 2.0 * h1.dot(mom.sigma_w13 * h3);
    if (!(den > 0.0))
        throw numerical_error("noisefig: signal power of the model output is not positive");
    return num / den * mom.ew2;
}

OutputSnr empirical_output_snr(const chansim::Link& link, const chansim::SymbolEqualizer& eq, std::size_t n_blocks,
                               std::size_t block_symbols, std::uint64_t seed)
{
    OutputSnr r;
    std::size_t count = 0;
    std::vector<double> xs(block_symbols), xn(block_symbols);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        auto sym_rng = substream(seed, "nf-symbols", b);
        auto noise_rng = substream(seed, "nf-noise", b);
        const auto x = link.random_symbols(block_symbols, sym_rng);
        const auto block = link.transmit(x, noise_rng);
        eq(block.signal, block.guard, xs);
        eq(block.observed(), block.guard, xn);
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double w = block.signal[block.guard + n], z = block.noise[block.guard + n];
            r.ps += xs[n] * xs[n];
            r.pn += (xn[n] - xs[n]) * (xn[n] - xs[n]);
            r.ew2 += w * w;
            r.ez2 += z * z;
        }
        count += x.size();
    }
    const double c = static_cast<double>(count);
    r.ps /= c;
    r.pn /= c;
    r.ew2 /= c;
    r.ez2 /= c;
    return r;
}

PenaltyReport penalty_report(double train_snr_db, double req_baseline_db, double req_c_db, double req_a_db,
                             double nf_db)
{
    PenaltyReport p;
    p.train_snr_db = train_snr_db;
    p.nl_penalty_db = req_c_db - req_baseline_db;
    p.ne_penalty_db = req_a_db - req_c_db;
    p.total_db = p.ne_penalty_db + p.nl_penalty_db;
    p.nf_db = nf_db;
    return p;
}

}  // namespace nleq::noisefig
