// Serial reference vs OpenMP for the two hot loops: waterfall frames and Volterra Gram sums.
// Usage: bench_parallel [frames] [blocks]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <omp.h>

#include "nleq/harness/waterfall.hpp"
#include "nleq/volterra/volterra.hpp"

using namespace nleq;

namespace {

template <class F>
double seconds(F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* what, double serial, double parallel, const char* agreement)
{
    std::printf("%-16s serial %8.3fs  openmp %8.3fs  speedup %5.2fx  %s\n", what, serial, parallel,
                serial / parallel, agreement);
}

}  // namespace

int main(int argc, char** argv)
{
    const std::uint64_t frames = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 64;
    const std::size_t blocks = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 40;
    std::printf("threads: %d\n", omp_get_max_threads());

    chansim::ChannelConfig cfg;
    cfg.nl_amplitude = 1.03;
    cfg.snr_db = 18.0;
    const chansim::Link link(cfg, chansim::default_guard(cfg, 4));
    const auto code =
        std::make_shared<const ldpc::Code>(ldpc::read_alist_file(NLEQ_DATA_DIR "/codes/desk_n4200_r08.alist"));
    const auto bp = harness::bp_decoder(code, 50);
    const harness::SystemFactory make = [&](double s) {
        harness::System sys{link.at_snr(s)};
        sys.rho = harness::calibrate_rho(sys.link, sys.variant, sys.eq, 3);
        sys.decoder = bp;
        return sys;
    };
    harness::WaterfallOptions opt;
    opt.frames_per_point = frames;
    opt.min_errors = 1u << 30;
    opt.batch = 16;
    const std::vector<double> grid{17.0, 18.0};

    std::string a, b;
    const double ws = seconds([&] { a = harness::curves_csv({harness::run_waterfall_serial("w", make, *code, grid, opt)}); });
    const double wp = seconds([&] { b = harness::curves_csv({harness::run_waterfall("w", make, *code, grid, opt)}); });
    report("waterfall", ws, wp, a == b ? "csv identical" : "csv MISMATCH");

    volterra::TrainOptions topt;
    topt.n_blocks = blocks;
    Eigen::MatrixXd g1, g2;
    const double gs = seconds([&] { g1 = volterra::collect_training_serial(link, topt).gram(); });
    const double gp = seconds([&] { g2 = volterra::collect_training(link, topt).gram(); });
    // partial sums merge in another order, so agreement is to rounding only
    char rel[64];
    std::snprintf(rel, sizeof rel, "rel. diff %.1e", (g1 - g2).norm() / g1.norm());
    report("volterra gram", gs, gp, rel);
    return 0;
}
