// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on stderr.
// Usage: acceptance [--criterion k ...] [--config path] [--out dir]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "nleq/harness/experiments.hpp"
#include "nleq/harness/svg.hpp"
#include "nnbp_fd.hpp"
#include "test_codes.hpp"

using namespace nleq;
using namespace nleq::harness;

namespace {

const auto t_start = std::chrono::steady_clock::now();

double elapsed() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); }

void log_line(const std::string& msg)
{
    std::fprintf(stderr, "[%8.1fs] %s\n", elapsed(), msg.c_str());
    std::fflush(stderr);
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    std::string config_path;
    std::string out_dir;
    ExperimentConfig cfg() const
    {
        auto c = load_config(config_path);
        c.output_dir = out_dir;
        return c;
    }
    void write(const std::string& name, const std::string& content) const
    {
        std::ofstream(std::filesystem::path(out_dir) / name, std::ios::binary) << content;
    }
};

std::vector<double> ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;  // ties share the mean rank
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// 1: residual of the MMSE fit is orthogonal to every feature
Outcome orthogonality(const Context& ctx)
{
    const auto cfg = ctx.cfg();
    auto ch = cfg.channel;
    ch.snr_db = cfg.volterra_train_snr_db;
    const chansim::Link link(ch, chansim::default_guard(ch, 4));
    volterra::TrainOptions opt;
    opt.memory = 4;
    opt.n_blocks = 100;
    opt.block_symbols = 2000;
    opt.seed = 7;
    const auto model = volterra::fit_mmse(volterra::collect_training(link, opt));
    const auto& iset = model.iset;
    std::vector<double> corr(iset.dim(), 0.0);
    double ex2 = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < opt.n_blocks; ++b) {
        auto sym_rng = substream(opt.seed, "volterra-symbols", b);
        auto noise_rng = substream(opt.seed, "volterra-noise", b);
        const auto x = link.random_symbols(opt.block_symbols, sym_rng);
        const auto block = link.transmit(x, noise_rng);
        const auto y = block.observed();
        std::vector<double> xhat(x.size());
        volterra::apply(model, y, block.guard, xhat);
        for (std::size_t n = 0; n < x.size(); ++n) {
            const auto f = volterra::build_features(y, block.guard + n, iset);
            const double e = xhat[n] - x[n];
            for (std::size_t q = 0; q < f.y1.size(); ++q)
                corr[q] += e * f.y1[q];
            for (std::size_t q = 0; q < f.y3.size(); ++q)
                corr[f.y1.size() + q] += e * f.y3[q];
            ex2 += x[n] * x[n];
            ++count;
        }
    }
    double worst = 0.0;
    for (double c : corr)
        worst = std::max(worst, std::abs(c) / static_cast<double>(count));
    ex2 /= static_cast<double>(count);
    return {worst < 1e-8 * ex2, "max |E[e f]| = " + fmt("%.3e", worst) + " vs bound " + fmt("%.3e", 1e-8 * ex2) +
                                    " over " + std::to_string(count) + " symbols"};
}

// 2: analytic noise figure against the paired-pass measurement over the sweep grid
Outcome noise_figure_fidelity(const Context& ctx)
{
    const Experiment exp(ctx.cfg(), log_line);
    std::ostringstream csv;
    csv << "train_snr,nf_db,nf_empirical_db,gap_db\n";
    bool ok = true;
    double worst = 0.0;
    int checked = 0;
    for (double t : exp.config().train_snr_grid) {
        const auto model = exp.fit_volterra(t);
        const auto [f, e] = noise_figures_db(exp, model);
        csv << t << ',' << fmt("%.5f", f) << ',' << fmt("%.5f", e) << ',' << fmt("%.5f", std::abs(f - e)) << '\n';
        log_line("nf at train " + fmt("%g", t) + ": analytic " + fmt("%.4f", f) + " dB, measured " + fmt("%.4f", e));
        if (t < 15.0)
            continue;
        ++checked;
        worst = std::max(worst, std::abs(f - e));
        ok = ok && std::abs(f - e) < 0.2;
    }
    ctx.write("acc2_noise_figure.csv", csv.str());
    return {ok && checked > 0, "max gap " + fmt("%.3f", worst) + " dB over " + std::to_string(checked) +
                                   " training SNRs >= 15 dB"};
}

// 3: NE rises and NL falls with the training SNR; the total has an interior minimum
Outcome tradeoff_shape(const Context& ctx)
{
    const Experiment exp(ctx.cfg(), log_line);
    const auto& grid = exp.config().train_snr_grid;
    if (grid.size() < 6)
        return {false, "training-SNR grid has fewer than 6 points"};
    const auto r = training_snr_sweep(exp, grid);
    ctx.write("acc3_sweep.csv", sweep_csv(r));
    ctx.write("acc3_curves.csv", curves_csv(r.curves));
    std::vector<double> x, ne, nl, tot;
    for (const auto& row : r.rows) {
        x.push_back(row.penalty.train_snr_db);
        ne.push_back(row.penalty.ne_penalty_db);
        nl.push_back(row.penalty.nl_penalty_db);
        tot.push_back(row.penalty.total_db);
    }
    Series s_ne{"NE-penalty", x, ne}, s_nl{"NL-penalty", x, nl}, s_t{"total", x, tot};
    ctx.write("acc3_sweep.svg", line_chart_svg("Penalties vs training SNR", "training SNR [dB]", "penalty [dB]",
                                               {s_ne, s_nl, s_t}, false));
    const double rho_ne = spearman(x, ne), rho_nl = spearman(x, nl);
    const double best = *std::min_element(tot.begin(), tot.end());
    const double drop = tot.front() - best;
    const bool ok = rho_ne >= 0.7 && rho_nl <= -0.7 && drop >= 0.05;
    return {ok, "spearman NE " + fmt("%.3f", rho_ne) + ", NL " + fmt("%.3f", rho_nl) + "; min total " +
                    fmt("%.3f", best) + " dB, " + fmt("%.3f", drop) + " dB below the lowest grid point"};
}

// 4: required-SNR ordering of all systems and the NN-BP gains
Outcome final_ordering(const Context& ctx)
{
    const Experiment exp(ctx.cfg(), log_line);
    const auto& cfg = exp.config();
    ComparisonModels m;
    m.vlt_optimal = std::make_shared<const volterra::VolterraModel>(exp.fit_volterra(cfg.volterra_train_snr_db));
    const double train_snr = nn_training_snr(exp);
    auto weights = [&](int stages) {
        auto r = train_nn(exp, stages, train_snr);
        auto w = std::make_shared<nnbp::Weights>();
        w->stages = r.stages;
        w->schedule = cfg.nn_schedule;
        w->schedule.n_stages = stages;
        w->schedule.n_res = cfg.nn_schedule.total_iterations() - (stages - 1) * cfg.nn_schedule.n_bn;
        nnbp::write_weights(w->stages, w->schedule,
                            (std::filesystem::path(ctx.out_dir) / ("acc4_nnbp_" + std::to_string(stages) + "stage.txt")).string());
        return w;
    };
    m.nn_three = weights(cfg.nn_schedule.n_stages);
    m.nn_one = cfg.nn_train.full_horizon_last
                   ? weights(1)
                   : std::make_shared<nnbp::Weights>(leading_stages(exp, *m.nn_three, 1));
    const auto c = final_comparison(exp, m);
    ctx.write("acc4_compare.csv", curves_csv(c.curves));
    ctx.write("acc4_compare.svg", ber_chart_svg("Final comparison", c.curves));
    ctx.write("acc4_report.txt", comparison_report(c));
    for (const auto& line : c.checks)
        log_line(line);
    const auto& r = c.required_db;
    const double gain_vlt = r[3] - r[5], gain_lin = r[1] - r[5];
    const bool ok = c.ordering_ok && gain_vlt >= 0.2 && gain_lin >= 0.8;
    std::string detail = "required";
    for (std::size_t i = 0; i < c.curves.size(); ++i)
        detail += " " + c.curves[i].label + "=" + fmt("%.3f", r[i]);
    detail += "; ordering " + std::string(c.ordering_ok ? "ok" : "violated") + ", gain over vlt-optimal " +
              fmt("%.3f", gain_vlt) + " dB, over no-equalizer " + fmt("%.3f", gain_lin) + " dB";
    return {ok, detail};
}

// 5: adjoint gradients of the 1-stage toy network per parameter group
Outcome gradient_check(const Context&)
{
    const auto code = test_codes::random_code(63, 15, 3, 11);
    nnbp::StageDims dims;
    dims.L = 2;
    dims.nq = 6;
    dims.nr = 5;
    dims.stride = 2;
    nnbp::Schedule sched;
    sched.n_stages = 1;
    sched.n_res = 2;
    sched.lambda1 = 1.0;
    sched.lambda2 = 0.6;
    const std::vector<nnbp::EqualizerStage> stages{nnbp_fd::random_stage(dims, 2)};
    auto rng = substream(13, "acc5");
    std::normal_distribution<double> normal(0.0, 2.5);
    std::vector<double> lR(code.n());
    std::vector<std::uint8_t> bits(code.n());
    for (std::size_t i = 0; i < code.n(); ++i) {
        lR[i] = normal(rng);
        bits[i] = rng() & 1;
    }
    const auto coords = nnbp_fd::compare(stages, sched, lR, bits, code, 0);
    const nnbp::NetLayout lay(dims);
    const std::pair<const char*, std::size_t> groups[] = {{"wR", lay.wR}, {"wB", lay.wB}, {"b1", lay.b1},
                                                          {"w2", lay.w2}, {"b2", lay.b2}, {"w3", lay.w3},
                                                          {"b3", lay.b3}};
    bool ok = true;
    std::string detail;
    for (int m = 1; m < dims.M; ++m)
        for (std::size_t g = 0; g < 7; ++g) {
            const std::size_t lo = groups[g].second;
            const std::size_t hi = g + 1 < 7 ? groups[g + 1].second : lay.size;
            double worst = 0.0, largest = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& c = coords[static_cast<std::size_t>(m - 1) * dims.net_size() + i];
                worst = std::max(worst, c.rel_error());
                largest = std::max(largest, std::abs(c.analytic));
            }
            // wB multiplies the previous stage's LLRs, which are zero in a single stage
            const bool inert = std::string(groups[g].first) == "wB";
            ok = ok && worst < 1e-4 && (inert ? largest == 0.0 : largest > 0.0);
            detail += std::string(detail.empty() ? "" : ", ") + groups[g].first + "[" + std::to_string(m) + "] " +
                      fmt("%.1e", worst);
        }
    // wB where it is live: second stage of a two-stage chain
    nnbp::Schedule two = sched;
    two.n_stages = 2;
    two.n_bn = 2;
    const std::vector<nnbp::EqualizerStage> chain{nnbp_fd::random_stage(dims, 3), nnbp_fd::random_stage(dims, 4)};
    const auto c2 = nnbp_fd::compare(chain, two, lR, bits, code, 1);
    double worst_b = 0.0, largest_b = 0.0;
    for (int m = 1; m < dims.M; ++m)
        for (std::size_t i = lay.wB; i < lay.b1; ++i) {
            const auto& c = c2[static_cast<std::size_t>(m - 1) * dims.net_size() + i];
            worst_b = std::max(worst_b, c.rel_error());
            largest_b = std::max(largest_b, std::abs(c.analytic));
        }
    ok = ok && worst_b < 1e-4 && largest_b > 0.0;
    detail += "; wB on stage 2 of a chain " + fmt("%.1e", worst_b);
    return {ok, "max relative error per group: " + detail};
}

// 6: BP on cycle-free graphs equals bitwise MAP by enumeration
Outcome tree_exactness(const Context&)
{
    double worst = 0.0;
    int codes = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto code = test_codes::random_tree_code(static_cast<int>(4 + seed % 10), 100 + seed);
        if (code.k() > 10)
            continue;
        auto rng = substream(seed, "acc6");
        std::normal_distribution<double> normal(0.3, 2.0);
        std::vector<double> llr(code.n());
        for (auto& v : llr)
            v = normal(rng);
        const auto map = test_codes::exhaustive_map(code, llr);
        const auto res = ldpc::decode(llr, code, {50, false});
        for (std::size_t v = 0; v < code.n(); ++v)
            worst = std::max(worst, std::abs(res.llr[v] - map[v]));
        ++codes;
    }
    return {worst < 1e-9 && codes >= 20,
            std::to_string(codes) + " tree codes, max |LLR - MAP| = " + fmt("%.2e", worst)};
}

double q_func(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// 7: pre-FEC BER of the linear chain against the Gaussian error integral
Outcome awgn_oracle(const Context& ctx)
{
    const auto cfg = ctx.cfg();
    const auto code = std::make_shared<const ldpc::Code>(ldpc::read_alist_file(cfg.code_path));
    auto ch = cfg.channel;
    ch.nl_amplitude = kInf;
    ch.snr_db = 30.0;
    const double snr = 22.5;
    const auto link = chansim::Link(ch, chansim::default_guard(ch, 4)).at_snr(snr);
    const double rho = calibrate_rho(link, chansim::Variant::a, chansim::identity_equalizer(), 5);

    // xhat = sum_k r_k x_{n-k} + noise, residual ISI counted as Gaussian
    const int span = 30;
    const auto r = link.receiver().symbol_response(span);
    double isi = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k)
        if (k != static_cast<std::size_t>(span))
            isi += r[k] * r[k];
    const auto& cons = link.constellation();
    double es = 0.0;
    for (double v : cons.levels())
        es += v * v / static_cast<double>(cons.size());
    const double sigma = std::sqrt(link.noise_variance() * link.receiver().noise_gain() + isi * es);
    std::vector<double> bounds{-kInf};
    for (std::size_t j = 0; j + 1 < cons.size(); ++j)
        bounds.push_back(0.5 * (cons.levels()[j] + cons.levels()[j + 1]));
    bounds.push_back(kInf);
    double oracle = 0.0;
    const int M = cons.bits_per_symbol();
    for (int m = 0; m < M; ++m)
        for (std::size_t i = 0; i < cons.size(); ++i) {
            const double x = r[span] * cons.levels()[i];
            for (std::size_t j = 0; j < cons.size(); ++j)
                if (cons.label_bit(j, m) != cons.label_bit(i, m))
                    oracle += q_func((bounds[j] - x) / sigma) - q_func((bounds[j + 1] - x) / sigma);
        }
    oracle /= static_cast<double>(M * cons.size());

    WaterfallOptions opt;
    opt.frames_per_point = 1000;
    opt.min_errors = 1u << 30;
    opt.batch = 50;
    opt.seed = 21;
    const auto curve = run_waterfall(
        "awgn",
        [&](double s) {
            System sys{link.at_snr(s)};
            sys.rho = rho;
            sys.decoder = [](std::span<const double> l) { return std::vector<double>(l.begin(), l.end()); };
            return sys;
        },
        *code, {snr}, opt);
    const double measured = curve.points.at(0).pre_ber();
    const double rel = std::abs(measured - oracle) / oracle;
    return {rel < 0.05, "at " + fmt("%g", snr) + " dB: measured " + fmt("%.4e", measured) + ", Q-function " +
                            fmt("%.4e", oracle) + ", relative difference " + fmt("%.3f", rel)};
}

// 8: calibrated drive level lands in the target band
Outcome calibration(const Context& ctx)
{
    const Experiment exp(ctx.cfg(), log_line);
    const auto r = calibrate(exp);
    ctx.write("acc8_calibration.ini", calibration_file(r));
    const auto& c = exp.config();
    const bool ok = r.in_band && r.refit_ratio >= c.calib_low && r.refit_ratio <= c.calib_high;
    return {ok, "A = " + fmt("%.5f", r.amplitude) + ", ratio " + fmt("%.5f", r.ratio) + ", fresh-seed refit " +
                    fmt("%.5f", r.refit_ratio) + ", band [" + fmt("%g", c.calib_low) + ", " + fmt("%g", c.calib_high) +
                    "]"};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// 9: the CLI reproduces its CSV byte for byte; serial and 8-thread runs count the same errors
Outcome determinism(const Context& ctx)
{
    const auto dir = std::filesystem::path(ctx.out_dir) / "acc9";
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
        const auto out = dir / ("run" + std::to_string(run));
        std::filesystem::remove_all(out);
        const std::string cmd = std::string("\"") + NLEQ_CLI + "\" waterfall --config \"" + NLEQ_SMOKE_CONFIG +
                                "\" --seed 5 --out \"" + out.string() + "\" 2>/dev/null";
        if (std::system(cmd.c_str()) != 0)
            return {false, "waterfall command failed: " + cmd};
        outputs[run] = slurp(out / "waterfall.csv");
    }
    const bool same_csv = !outputs[0].empty() && outputs[0] == outputs[1];

    const Experiment exp(load_config(NLEQ_SMOKE_CONFIG));
    const auto make = exp.linear_only();
    auto opt = exp.waterfall_options();
    const auto serial = run_waterfall_serial("s", make, *exp.code(), exp.config().snr_grid, opt);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(8);
    const auto par = run_waterfall("s", make, *exp.code(), exp.config().snr_grid, opt);
    omp_set_num_threads(saved);
    const bool same_counts = curves_csv({serial}) == curves_csv({par});
    std::uint64_t errors = 0;
    for (const auto& p : serial.points)
        errors += p.post_errors;
    return {same_csv && same_counts && errors > 0,
            std::string("repeated CLI csv ") + (same_csv ? "identical" : "DIFFERENT") + "; serial vs 8 threads " +
                (same_counts ? "identical" : "DIFFERENT") + " (" + std::to_string(errors) + " post-BP errors)"};
}

// 10: cubic index-set size against a direct count
Outcome index_counts(const Context&)
{
    bool ok = true;
    std::string detail;
    for (int L = 0; L <= 6; ++L) {
        std::set<std::tuple<int, int, int>> oracle;
        for (int a = -L; a <= L; ++a)
            for (int b = -L; b <= L; ++b)
                for (int c = -L; c <= L; ++c) {
                    int t[3] = {a, b, c};
                    std::sort(t, t + 3);
                    oracle.insert({t[0], t[1], t[2]});
                }
        const auto n = volterra::build_index_set(L).cubic_size();
        ok = ok && n == oracle.size();
        detail += std::string(L ? " " : "") + std::to_string(n);
    }
    ok = ok && volterra::build_index_set(4).cubic_size() == 165;
    return {ok, "sizes for L = 0..6:" + std::string(" ") + detail};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    Context ctx{NLEQ_ACCEPTANCE_CONFIG, "acceptance_out"};
    app.add_option("--criterion", only, "criteria to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--config", ctx.config_path, "experiment config");
    app.add_option("--out", ctx.out_dir, "directory for artifacts");
    CLI11_PARSE(app, argc, argv);
    std::filesystem::create_directories(ctx.out_dir);

    using Fn = Outcome (*)(const Context&);
    const std::pair<const char*, Fn> criteria[] = {
        {"volterra orthogonality", orthogonality},   {"noise-figure fidelity", noise_figure_fidelity},
        {"penalty trade-off shape", tradeoff_shape}, {"final ordering and gains", final_ordering},
        {"gradient correctness", gradient_check},    {"bp exactness on trees", tree_exactness},
        {"awgn oracle", awgn_oracle},                {"calibration", calibration},
        {"determinism", determinism},                {"index-set counts", index_counts}};
    if (only.empty())
        for (int k = 1; k <= 10; ++k)
            only.push_back(k);

    int failed = 0;
    for (int k : only) {
        const auto& [name, fn] = criteria[k - 1];
        log_line(std::string("criterion ") + std::to_string(k) + ": " + name);
        const double t0 = elapsed();
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str(), elapsed() - t0);
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
