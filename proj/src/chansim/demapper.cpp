#include "nleq/chansim/demapper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nleq/common.hpp"

namespace nleq::chansim {

namespace {

double log_sum_exp(std::span<const double> metric, std::span<const int> members)
{
    double peak = -std::numeric_limits<double>::infinity();
    for (int i : members)
        peak = std::max(peak, metric[i]);
    double acc = 0.0;
    for (int i : members)
        acc += std::exp(metric[i] - peak);
    return peak + std::log(acc);
}

}  // namespace

std::vector<double> soft_demap(std::span<const double> xhat, const Constellation& c, double rho)
{
    if (!(rho > 0.0))
        throw invalid_input("soft_demap: rho must be > 0");
    const int m_bits = c.bits_per_symbol();
    const auto levels = c.levels();
    std::vector<double> metric(levels.size());
    std::vector<double> llr(xhat.size() * m_bits);
    for (std::size_t n = 0; n < xhat.size(); ++n) {
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const double d = xhat[n] - levels[i];
            metric[i] = -rho * d * d;
        }
        for (int m = 0; m < m_bits; ++m) {
            const double l = log_sum_exp(metric, c.partition(m, 0)) - log_sum_exp(metric, c.partition(m, 1));
            llr[n * m_bits + m] = clamp_llr(l);
        }
    }
    return llr;
}

double rho_for_variance(double variance)
{
    if (!(variance > 0.0))
        throw invalid_input("rho_for_variance: variance must be > 0");
    return 0.5 / variance;
}

}  // namespace nleq::chansim
