// Progressive-edge-growth construction of a column-regular LDPC code, written as alist.
// Columns are reordered so the trailing n-k columns are independent, which makes the
// information bits the leading k codeword positions.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <queue>
#include <random>

#include "CLI11.hpp"
#include "nleq/ldpc/code.hpp"

namespace {

std::vector<std::vector<int>> peg(int n, int m, int dv, std::mt19937_64& rng)
{
    std::vector<std::vector<int>> var_checks(n), check_vars(m);
    std::vector<int> check_depth(m);
    std::vector<char> var_seen(n);
    for (int v = 0; v < n; ++v) {
        for (int j = 0; j < dv; ++j) {
            std::vector<int> candidates;
            if (var_checks[v].empty()) {
                for (int c = 0; c < m; ++c)
                    candidates.push_back(c);
            } else {
                // BFS over the current graph; candidates are unreachable checks, or the
                // checks first reached at the deepest level.
                std::fill(check_depth.begin(), check_depth.end(), -1);
                std::fill(var_seen.begin(), var_seen.end(), 0);
                std::vector<int> frontier{v};
                var_seen[v] = 1;
                int depth = 0;
                std::vector<int> last_level;
                while (!frontier.empty()) {
                    std::vector<int> level;
                    for (int x : frontier)
                        for (int c : var_checks[x])
                            if (check_depth[c] < 0) {
                                check_depth[c] = depth;
                                level.push_back(c);
                            }
                    if (level.empty())
                        break;
                    last_level = level;
                    std::vector<int> next;
                    for (int c : level)
                        for (int x : check_vars[c])
                            if (!var_seen[x]) {
                                var_seen[x] = 1;
                                next.push_back(x);
                            }
                    frontier = std::move(next);
                    ++depth;
                }
                for (int c = 0; c < m; ++c)
                    if (check_depth[c] < 0)
                        candidates.push_back(c);
                if (candidates.empty())
                    candidates = last_level;
            }
            std::size_t best = SIZE_MAX;
            for (int c : candidates)
                best = std::min(best, check_vars[c].size());
            std::vector<int> lowest;
            for (int c : candidates)
                if (check_vars[c].size() == best && std::find(var_checks[v].begin(), var_checks[v].end(), c) == var_checks[v].end())
                    lowest.push_back(c);
            if (lowest.empty())
                throw std::runtime_error("peg: no admissible check");
            const int c = lowest[std::uniform_int_distribution<std::size_t>(0, lowest.size() - 1)(rng)];
            var_checks[v].push_back(c);
            check_vars[c].push_back(v);
        }
    }
    return check_vars;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Generate a PEG LDPC code in alist format"};
    int n = 4200, m = 840, dv = 3;
    std::uint64_t seed = 1;
    std::string out;
    app.add_option("-n", n, "codeword length");
    app.add_option("-m", m, "number of checks");
    app.add_option("--dv", dv, "variable degree");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("-o,--out", out, "output alist path")->required();
    CLI11_PARSE(app, argc, argv);

    for (int attempt = 0; attempt < 16; ++attempt) {
        std::mt19937_64 rng(seed + attempt);
        auto rows = peg(n, m, dv, rng);
        try {
            nleq::ldpc::Code code(n, rows);
            // move the pivot columns to the end
            const auto info = code.info_positions();
            std::vector<int> order(info.begin(), info.end());
            std::vector<char> is_info(n, 0);
            for (int c : info)
                is_info[c] = 1;
            for (int c = 0; c < n; ++c)
                if (!is_info[c])
                    order.push_back(c);
            std::vector<int> new_index(n);
            for (int i = 0; i < n; ++i)
                new_index[order[i]] = i;
            for (auto& row : rows)
                for (int& v : row)
                    v = new_index[v];
            nleq::ldpc::Code permuted(n, rows);
            std::ofstream f(out);
            f << nleq::ldpc::to_alist(permuted);
            std::cout << "wrote " << out << ": n=" << permuted.n() << " k=" << permuted.k()
                      << " rate=" << permuted.rate() << " (attempt " << attempt << ")\n";
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "attempt " << attempt << ": " << e.what() << '\n';
        }
    }
    return 1;
}
