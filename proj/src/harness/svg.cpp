#include "nleq/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace nleq::harness {

namespace {

constexpr double kW = 720, kH = 480, kLeft = 80, kRight = 190, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, bool log_y)
{
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i]) || !std::isfinite(s.x[i]))
                continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 >= x0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    if (log_y) {
        y0 = std::floor(y0);
        y1 = std::ceil(y1);
    }
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    // ticks
    const int nx = 8;
    for (int i = 0; i <= nx; ++i) {
        const double x = x0 + (x1 - x0) * i / nx;
        o << "<line x1=\"" << num(px(x)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(x)) << "\" y2=\"" << kTop + ph
          << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(px(x)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
          << tick_label(std::round(x * 100) / 100) << "</text>\n";
    }
    if (log_y) {
        for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
            o << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(e)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
              << num(py(e)) << "\" stroke=\"#e0e0e0\"/>\n";
            o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(e) + 4) << "\" text-anchor=\"end\">1e" << e
              << "</text>\n";
        }
    } else {
        const int ny = 6;
        for (int i = 0; i <= ny; ++i) {
            const double y = y0 + (y1 - y0) * i / ny;
            o << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
              << num(py(y)) << "\" stroke=\"#e0e0e0\"/>\n";
            o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
              << tick_label(std::round(y * 1000) / 1000) << "</text>\n";
        }
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 18 << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n";
    o << "<text transform=\"translate(20," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i]))
                continue;
            pts << num(px(s.x[i])) << ',' << num(py(ty(s.y[i]))) << ' ';
            o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(ty(s.y[i]))) << "\" r=\"2.5\" fill=\""
              << color << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
          << "\"/>\n";
        const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string ber_chart_svg(const std::string& title, const std::vector<BerCurve>& curves)
{
    std::vector<Series> s;
    for (const auto& c : curves) {
        Series one{c.label, {}, {}};
        for (const auto& p : c.points) {
            one.x.push_back(p.snr_db);
            one.y.push_back(p.post_ber());
        }
        s.push_back(std::move(one));
    }
    return line_chart_svg(title, "SNR [dB]", "post-BP BER", s, true);
}

}  // namespace nleq::harness
