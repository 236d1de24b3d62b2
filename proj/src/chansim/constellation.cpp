#include "nleq/chansim/constellation.hpp"

#include <cmath>
#include <string>

#include "nleq/common.hpp"

namespace nleq::chansim {

Constellation Constellation::pam8_gray()
{
    const double s = 1.0 / std::sqrt(21.0);
    // magnitude index -> (d1, d2) Gray pair
    const int gray[4][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    std::vector<double> levels;
    std::vector<std::uint8_t> labels;
    for (int sign = 1; sign >= 0; --sign) {
        for (int k = 0; k < 4; ++k) {
            const int mag = sign ? 3 - k : k;  // ascending amplitude order
            const double amp = (2 * mag + 1) * s * (sign ? -1.0 : 1.0);
            levels.push_back(amp);
            labels.push_back(static_cast<std::uint8_t>(sign | (gray[mag][0] << 1) | (gray[mag][1] << 2)));
        }
    }
    return {std::move(levels), std::move(labels), 3};
}

Constellation::Constellation(std::vector<double> levels, std::vector<std::uint8_t> labels, int bits_per_symbol)
    : levels_(std::move(levels)), labels_(std::move(labels)), bits_(bits_per_symbol)
{
    if (bits_ < 1 || levels_.size() != (std::size_t{1} << bits_) || labels_.size() != levels_.size())
        throw invalid_input("constellation: need 2^M levels and labels");
    level_of_label_.assign(levels_.size(), -1);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= levels_.size() || level_of_label_[labels_[i]] >= 0)
            throw invalid_input("constellation: labels must be a permutation of 0..2^M-1");
        level_of_label_[labels_[i]] = static_cast<int>(i);
    }
    partitions_.resize(2 * bits_);
    for (int m = 0; m < bits_; ++m)
        for (std::size_t i = 0; i < levels_.size(); ++i)
            partitions_[2 * m + label_bit(i, m)].push_back(static_cast<int>(i));
}

double Constellation::map_label(std::uint8_t label) const
{
    if (label >= level_of_label_.size())
        throw invalid_input("constellation: unknown label " + std::to_string(label));
    return levels_[level_of_label_[label]];
}

std::size_t Constellation::nearest(double x) const noexcept
{
    std::size_t best = 0;
    double best_d = std::abs(x - levels_[0]);
    for (std::size_t i = 1; i < levels_.size(); ++i) {
        const double d = std::abs(x - levels_[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<double> map_bits(std::span<const std::uint8_t> bits, const Constellation& c)
{
    const auto m = static_cast<std::size_t>(c.bits_per_symbol());
    if (bits.size() % m != 0)
        throw invalid_input("map_bits: bit count is not a multiple of bits per symbol");
    std::vector<double> x(bits.size() / m);
    for (std::size_t n = 0; n < x.size(); ++n) {
        unsigned label = 0;
        for (std::size_t b = 0; b < m; ++b) {
            const auto bit = bits[n * m + b];
            if (bit > 1)
                throw invalid_input("map_bits: bit values must be 0 or 1");
            label |= static_cast<unsigned>(bit) << b;
        }
        x[n] = c.map_label(static_cast<std::uint8_t>(label));
    }
    return x;
}

std::vector<std::uint8_t> hard_decide(std::span<const double> xhat, const Constellation& c)
{
    const auto m = c.bits_per_symbol();
    std::vector<std::uint8_t> bits(xhat.size() * m);
    for (std::size_t n = 0; n < xhat.size(); ++n) {
        const auto level = c.nearest(xhat[n]);
        for (int b = 0; b < m; ++b)
            bits[n * m + b] = static_cast<std::uint8_t>(c.label_bit(level, b));
    }
    return bits;
}

}  // namespace nleq::chansim
