#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nleq::ldpc {

/// Sparse parity-check matrix with a cached systematic encoder.
///
/// Edges are numbered check-major: the edges of check c are
/// [check_begin(c), check_begin(c+1)), and edge_var(e) is the variable on edge e.
class Code {
public:
    /// Builds the code from per-check variable lists. Throws invalid_input on
    /// out-of-range or repeated indices and on a rank-deficient matrix.
    Code(std::size_t n, std::vector<std::vector<int>> check_vars);

    std::size_t n() const noexcept { return n_; }
    std::size_t k() const noexcept { return n_ - check_vars_.size(); }
    std::size_t checks() const noexcept { return check_vars_.size(); }
    std::size_t edges() const noexcept { return edge_var_.size(); }
    double rate() const noexcept { return static_cast<double>(k()) / static_cast<double>(n_); }

    const std::vector<std::vector<int>>& check_to_var() const noexcept { return check_vars_; }
    const std::vector<std::vector<int>>& var_to_check() const noexcept { return var_checks_; }

    std::size_t check_begin(std::size_t c) const { return check_offset_[c]; }
    int edge_var(std::size_t e) const { return edge_var_[e]; }
    /// Edge indices attached to variable v.
    std::span<const int> var_edges(std::size_t v) const
    {
        return {var_edge_.data() + var_offset_[v], var_offset_[v + 1] - var_offset_[v]};
    }

    /// Codeword positions carrying the information bits, in encoding order.
    std::span<const int> info_positions() const noexcept { return info_pos_; }

    /// Systematic codeword for `info` (|info| = k). Throws invalid_input on length mismatch.
    std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info) const;

    /// True iff H * bits = 0 over GF(2). Throws invalid_input on length mismatch.
    bool syndrome(std::span<const std::uint8_t> bits) const;

private:
    void build_encoder();

    std::size_t n_;
    std::vector<std::vector<int>> check_vars_;
    std::vector<std::vector<int>> var_checks_;
    std::vector<std::size_t> check_offset_;
    std::vector<int> edge_var_;
    std::vector<std::size_t> var_offset_;
    std::vector<int> var_edge_;

    std::vector<int> info_pos_;
    std::vector<int> parity_pos_;
    std::size_t info_words_ = 0;
    // parity_pos_[r] = XOR of info bits selected by generator_[r * info_words_ ...]
    std::vector<std::uint64_t> generator_;
};

/// Parses MacKay alist text. Throws invalid_input on a malformed header, degree or
/// adjacency inconsistencies, and rank deficiency (reported with row indices).
Code load_alist(std::string_view text);
Code read_alist_file(const std::string& path);
std::string to_alist(const Code& code);

/// Free-function forms.
std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info, const Code& code);
bool syndrome(std::span<const std::uint8_t> bits, const Code& code);

}  // namespace nleq::ldpc
