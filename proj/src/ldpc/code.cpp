#include "nleq/ldpc/code.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "nleq/common.hpp"

namespace nleq::ldpc {

Code::Code(std::size_t n, std::vector<std::vector<int>> check_vars) : n_(n), check_vars_(std::move(check_vars))
{
    if (n_ == 0 || check_vars_.empty() || check_vars_.size() >= n_)
        throw invalid_input("ldpc: need 0 < checks < n");
    var_checks_.assign(n_, {});
    check_offset_.reserve(check_vars_.size() + 1);
    check_offset_.push_back(0);
    for (std::size_t c = 0; c < check_vars_.size(); ++c) {
        auto& row = check_vars_[c];
        std::sort(row.begin(), row.end());
        if (row.empty())
            throw invalid_input("ldpc: check " + std::to_string(c) + " has no variables");
        if (std::adjacent_find(row.begin(), row.end()) != row.end())
            throw invalid_input("ldpc: check " + std::to_string(c) + " lists a variable twice");
        for (int v : row) {
            if (v < 0 || static_cast<std::size_t>(v) >= n_)
                throw invalid_input("ldpc: variable index out of range in check " + std::to_string(c));
            var_checks_[v].push_back(static_cast<int>(c));
            edge_var_.push_back(v);
        }
        check_offset_.push_back(edge_var_.size());
    }

    var_offset_.assign(n_ + 1, 0);
    for (int v : edge_var_)
        ++var_offset_[v + 1];
    for (std::size_t v = 0; v < n_; ++v)
        var_offset_[v + 1] += var_offset_[v];
    var_edge_.assign(edge_var_.size(), 0);
    std::vector<std::size_t> fill(var_offset_.begin(), var_offset_.end() - 1);
    for (std::size_t e = 0; e < edge_var_.size(); ++e)
        var_edge_[fill[edge_var_[e]]++] = static_cast<int>(e);

    build_encoder();
}

void Code::build_encoder()
{
    const std::size_t m = check_vars_.size();
    const std::size_t words = (n_ + 63) / 64;
    std::vector<std::uint64_t> h(m * words, 0);
    for (std::size_t r = 0; r < m; ++r)
        for (int v : check_vars_[r])
            h[r * words + v / 64] |= std::uint64_t{1} << (v % 64);
    auto bit = [&](std::size_t r, std::size_t col) { return (h[r * words + col / 64] >> (col % 64)) & 1; };

    std::vector<std::size_t> origin(m);
    for (std::size_t r = 0; r < m; ++r)
        origin[r] = r;
    std::vector<int> pivot_col;
    pivot_col.reserve(m);
    std::vector<bool> is_pivot(n_, false);

    // Reduced row echelon form, pivots taken from the last columns first so that, when the
    // trailing n-k columns are independent, the information bits are the leading k positions.
    std::size_t rank = 0;
    for (std::size_t col = n_; col-- > 0 && rank < m;) {
        std::size_t sel = rank;
        while (sel < m && !bit(sel, col))
            ++sel;
        if (sel == m)
            continue;
        if (sel != rank) {
            std::swap_ranges(h.begin() + sel * words, h.begin() + (sel + 1) * words, h.begin() + rank * words);
            std::swap(origin[sel], origin[rank]);
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (r != rank && bit(r, col)) {
                for (std::size_t w = 0; w < words; ++w)
                    h[r * words + w] ^= h[rank * words + w];
            }
        }
        pivot_col.push_back(static_cast<int>(col));
        is_pivot[col] = true;
        ++rank;
    }
    if (rank < m) {
        std::string rows;
        for (std::size_t r = rank; r < m; ++r)
            rows += (rows.empty() ? "" : ", ") + std::to_string(origin[r]);
        throw invalid_input("ldpc: parity-check matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                            std::to_string(m) + "); dependent rows: " + rows);
    }

    info_pos_.clear();
    for (std::size_t col = 0; col < n_; ++col)
        if (!is_pivot[col])
            info_pos_.push_back(static_cast<int>(col));
    parity_pos_ = pivot_col;
    const std::size_t k = info_pos_.size();
    info_words_ = (k + 63) / 64;
    generator_.assign(m * info_words_, 0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t i = 0; i < k; ++i)
            if (bit(r, static_cast<std::size_t>(info_pos_[i])))
                generator_[r * info_words_ + i / 64] |= std::uint64_t{1} << (i % 64);
}

std::vector<std::uint8_t> Code::encode(std::span<const std::uint8_t> info) const
{
    if (info.size() != k())
        throw invalid_input("ldpc encode: expected " + std::to_string(k()) + " info bits, got " +
                            std::to_string(info.size()));
    std::vector<std::uint64_t> packed(info_words_, 0);
    for (std::size_t i = 0; i < info.size(); ++i)
        if (info[i] & 1)
            packed[i / 64] |= std::uint64_t{1} << (i % 64);

    std::vector<std::uint8_t> cw(n_, 0);
    for (std::size_t i = 0; i < info.size(); ++i)
        cw[info_pos_[i]] = info[i] & 1;
    for (std::size_t r = 0; r < parity_pos_.size(); ++r) {
        int parity = 0;
        for (std::size_t w = 0; w < info_words_; ++w)
            parity ^= std::popcount(generator_[r * info_words_ + w] & packed[w]) & 1;
        cw[parity_pos_[r]] = static_cast<std::uint8_t>(parity);
    }
    return cw;
}

bool Code::syndrome(std::span<const std::uint8_t> bits) const
{
    if (bits.size() != n_)
        throw invalid_input("ldpc syndrome: expected " + std::to_string(n_) + " bits");
    for (const auto& row : check_vars_) {
        int parity = 0;
        for (int v : row)
            parity ^= bits[v] & 1;
        if (parity)
            return false;
    }
    return true;
}

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info, const Code& code) { return code.encode(info); }

bool syndrome(std::span<const std::uint8_t> bits, const Code& code) { return code.syndrome(bits); }

namespace {

long read_int(std::istringstream& in, const char* what)
{
    long v;
    if (!(in >> v))
        throw invalid_input(std::string("alist: could not read ") + what);
    return v;
}

}  // namespace

Code load_alist(std::string_view text)
{
    std::istringstream in{std::string(text)};
    const long n = read_int(in, "n");
    const long m = read_int(in, "m");
    if (n <= 0 || m <= 0)
        throw invalid_input("alist: header must give positive n and m");
    const long max_col = read_int(in, "max column weight");
    const long max_row = read_int(in, "max row weight");
    if (max_col <= 0 || max_row <= 0)
        throw invalid_input("alist: header must give positive maximum weights");

    std::vector<long> col_w(n), row_w(m);
    for (auto& w : col_w) {
        w = read_int(in, "column weight");
        if (w < 0 || w > max_col)
            throw invalid_input("alist: column weight exceeds the declared maximum");
    }
    for (auto& w : row_w) {
        w = read_int(in, "row weight");
        if (w < 0 || w > max_row)
            throw invalid_input("alist: row weight exceeds the declared maximum");
    }

    std::vector<std::vector<int>> cols(n), rows(m);
    for (long c = 0; c < n; ++c) {
        for (long j = 0; j < max_col; ++j) {
            const long r = read_int(in, "column entry");
            if (r == 0) {
                if (j < col_w[c])
                    throw invalid_input("alist: column " + std::to_string(c) + " lists fewer entries than its weight");
                continue;
            }
            if (r < 1 || r > m || j >= col_w[c])
                throw invalid_input("alist: bad entry in column " + std::to_string(c));
            cols[c].push_back(static_cast<int>(r - 1));
        }
    }
    for (long r = 0; r < m; ++r) {
        for (long j = 0; j < max_row; ++j) {
            const long c = read_int(in, "row entry");
            if (c == 0) {
                if (j < row_w[r])
                    throw invalid_input("alist: row " + std::to_string(r) + " lists fewer entries than its weight");
                continue;
            }
            if (c < 1 || c > n || j >= row_w[r])
                throw invalid_input("alist: bad entry in row " + std::to_string(r));
            rows[r].push_back(static_cast<int>(c - 1));
        }
    }

    // the column lists must be the transpose of the row lists
    std::vector<std::vector<int>> from_rows(n);
    for (long r = 0; r < m; ++r)
        for (int c : rows[r])
            from_rows[c].push_back(static_cast<int>(r));
    for (long c = 0; c < n; ++c) {
        auto a = cols[c];
        std::sort(a.begin(), a.end());
        if (a != from_rows[c])
            throw invalid_input("alist: column " + std::to_string(c) + " is inconsistent with the row lists");
    }
    return Code(static_cast<std::size_t>(n), std::move(rows));
}

Code read_alist_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw invalid_input("cannot open alist file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return load_alist(ss.str());
}

std::string to_alist(const Code& code)
{
    const auto& rows = code.check_to_var();
    const auto& cols = code.var_to_check();
    std::size_t max_col = 0, max_row = 0;
    for (const auto& c : cols)
        max_col = std::max(max_col, c.size());
    for (const auto& r : rows)
        max_row = std::max(max_row, r.size());

    std::ostringstream out;
    out << code.n() << ' ' << code.checks() << '\n' << max_col << ' ' << max_row << '\n';
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << cols[c].size() << (c + 1 < cols.size() ? ' ' : '\n');
    for (std::size_t r = 0; r < rows.size(); ++r)
        out << rows[r].size() << (r + 1 < rows.size() ? ' ' : '\n');
    for (const auto& c : cols) {
        for (std::size_t j = 0; j < max_col; ++j)
            out << (j < c.size() ? c[j] + 1 : 0) << (j + 1 < max_col ? ' ' : '\n');
    }
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < max_row; ++j)
            out << (j < r.size() ? r[j] + 1 : 0) << (j + 1 < max_row ? ' ' : '\n');
    }
    return out.str();
}

}  // namespace nleq::ldpc
