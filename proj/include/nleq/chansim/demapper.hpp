#pragma once

#include <span>
#include <vector>

#include "nleq/chansim/constellation.hpp"

namespace nleq::chansim {

struct SoftDemapConfig {
    /// Scale of the Gaussian metric exp(-rho |xhat - x|^2); 1 / (2 sigma^2) for noise variance sigma^2.
    double rho = 1.0;
};

/// Bitwise LLRs l[n*M + m] = log sum_{chi_m^0} exp(-rho d^2) - log sum_{chi_m^1} exp(-rho d^2),
/// evaluated with log-sum-exp and clamped to +-kLlrMax.
std::vector<double> soft_demap(std::span<const double> xhat, const Constellation& c, double rho);

/// Demapper scale for an observed error variance.
double rho_for_variance(double variance);

}  // namespace nleq::chansim
