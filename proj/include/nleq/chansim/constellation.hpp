#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace nleq::chansim {

/// One real dimension of a square QAM: Gray-labelled PAM with unit mean power.
/// Bit 0 of every label is the sign bit (0 for positive amplitudes).
class Constellation {
public:
    /// 8-PAM, bit 0 = sign, (d1,d2) = 00,01,11,10 -> magnitudes 1,3,5,7 (scaled by 1/sqrt(21)).
    static Constellation pam8_gray();

    Constellation(std::vector<double> levels, std::vector<std::uint8_t> labels, int bits_per_symbol);

    int bits_per_symbol() const noexcept { return bits_; }
    std::size_t size() const noexcept { return levels_.size(); }
    std::span<const double> levels() const noexcept { return levels_; }
    std::uint8_t label(std::size_t level) const { return labels_.at(level); }
    int label_bit(std::size_t level, int m) const { return (labels_.at(level) >> m) & 1; }

    /// Indices of levels whose label bit m equals `bit` (the sets chi_m^0 / chi_m^1).
    std::span<const int> partition(int m, int bit) const { return partitions_.at(2 * m + bit); }

    /// Level for a packed label (bit m of `label` is label bit m). Throws invalid_input.
    double map_label(std::uint8_t label) const;

    /// Index of the level closest to `x`.
    std::size_t nearest(double x) const noexcept;

private:
    std::vector<double> levels_;
    std::vector<std::uint8_t> labels_;
    std::vector<int> level_of_label_;
    std::vector<std::vector<int>> partitions_;
    int bits_;
};

/// Maps consecutive groups of bits_per_symbol bits onto amplitudes (bit m of a group is label bit m).
std::vector<double> map_bits(std::span<const std::uint8_t> bits, const Constellation& c);

/// Nearest-level slicing followed by label lookup; the inverse of map_bits on noiseless input.
std::vector<std::uint8_t> hard_decide(std::span<const double> xhat, const Constellation& c);

}  // namespace nleq::chansim
