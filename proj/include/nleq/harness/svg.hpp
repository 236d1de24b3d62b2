#pragma once

#include <string>
#include <vector>

#include "nleq/harness/waterfall.hpp"

namespace nleq::harness {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

/// Self-contained SVG line chart. With `log_y` nonpositive values are dropped.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, bool log_y);

/// Post-BP BER against SNR for each curve.
std::string ber_chart_svg(const std::string& title, const std::vector<BerCurve>& curves);

}  // namespace nleq::harness
