#include "nleq/chansim/receiver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

namespace nleq::chansim {

LinearReceiver::LinearReceiver(const ChannelConfig& cfg)
    : cfg_(cfg), rx_taps_(rrc_taps(cfg.sps, cfg.rolloff, cfg.rrc_span_symbols)), fir_(cfg.fir_len, 0.0)
{
    fir_[cfg.fir_len / 2] = 1.0;
}

LinearReceiver LinearReceiver::fit(const ChannelConfig& cfg, const FrameSignal& received, std::span<const double> pilots,
                                   std::size_t first_symbol)
{
    cfg.validate();
    if (pilots.size() < static_cast<std::size_t>(10 * cfg.fir_len) || first_symbol + pilots.size() > received.n_symbols)
        throw invalid_input("linear receiver: pilot block must hold >= 10 x fir_len symbols of the signal");

    LinearReceiver rx(cfg);
    const auto mf = rx.matched_filter(received);
    const int dim = cfg.fir_len;
    const int half = dim / 2;
    const auto len = static_cast<std::ptrdiff_t>(mf.size());

    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd row(dim);
    for (std::size_t n = 0; n < pilots.size(); ++n) {
        const auto centre = static_cast<std::ptrdiff_t>(first_symbol + n) * cfg.sps;
        for (int k = 0; k < dim; ++k) {
            const auto pos = centre + k - half;
            row[k] = (pos >= 0 && pos < len) ? mf[pos] : 0.0;
        }
        r.selfadjointView<Eigen::Lower>().rankUpdate(row);
        p += row * pilots[n];
    }
    r.triangularView<Eigen::Upper>() = r.transpose();
    const double ridge = 1e-8 * r.trace() / dim;
    r.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success)
        throw numerical_error("linear receiver: normal matrix is not positive definite after ridge");
    const Eigen::VectorXd taps = llt.solve(p);
    rx.fir_.assign(taps.data(), taps.data() + dim);
    return rx;
}

std::vector<double> LinearReceiver::matched_filter(const FrameSignal& s) const
{
    return filter_same(s.samples, rx_taps_);
}

std::vector<double> LinearReceiver::equalize(std::span<const double> mf, std::size_t n_symbols) const
{
    const int half = static_cast<int>(fir_.size() / 2);
    const auto len = static_cast<std::ptrdiff_t>(mf.size());
    std::vector<double> y(n_symbols, 0.0);
    for (std::size_t n = 0; n < n_symbols; ++n) {
        const auto centre = static_cast<std::ptrdiff_t>(n) * cfg_.sps;
        double acc = 0.0;
        for (std::size_t k = 0; k < fir_.size(); ++k) {
            const auto pos = centre + static_cast<std::ptrdiff_t>(k) - half;
            if (pos >= 0 && pos < len)
                acc += fir_[k] * mf[pos];
        }
        y[n] = acc;
    }
    return y;
}

std::vector<double> LinearReceiver::receive(const FrameSignal& s) const
{
    return equalize(matched_filter(s), s.n_symbols);
}

double LinearReceiver::noise_gain() const
{
    // y_n = sum_k f_k (g * v)[n*sps + k - half]; composite c = g conv f.
    std::vector<double> c(rx_taps_.size() + fir_.size() - 1, 0.0);
    for (std::size_t i = 0; i < rx_taps_.size(); ++i)
        for (std::size_t k = 0; k < fir_.size(); ++k)
            c[i + k] += rx_taps_[i] * fir_[k];
    double g = 0.0;
    for (double v : c)
        g += v * v;
    return g;
}

std::vector<double> LinearReceiver::symbol_response(int span) const
{
    const std::size_t n = 2 * static_cast<std::size_t>(span) + 1;
    std::vector<double> impulse(n, 0.0);
    impulse[span] = 1.0;
    auto shaped = rrc_shape(impulse, cfg_);
    return receive(shaped);
}

std::vector<double> linear_receive(const FrameSignal& s, const ChannelConfig& cfg, std::span<const double> pilots)
{
    return LinearReceiver::fit(cfg, s, pilots).receive(s);
}

}  // namespace nleq::chansim
