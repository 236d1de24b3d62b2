#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "doctest.h"
#include "nleq/chansim/constellation.hpp"
#include "nleq/chansim/demapper.hpp"
#include "nleq/common.hpp"
#include "nleq/nnbp/nnbp.hpp"
#include "nnbp_fd.hpp"
#include "test_codes.hpp"

using namespace nleq;
using namespace nleq::nnbp;

namespace {

std::vector<double> random_llrs(std::size_t n, double scale, std::uint64_t seed)
{
    auto rng = substream(seed, "llr");
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> l(n);
    for (auto& v : l)
        v = normal(rng);
    return l;
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed)
{
    auto rng = substream(seed, "bits");
    std::vector<std::uint8_t> b(n);
    for (auto& v : b)
        v = rng() & 1;
    return b;
}

// independent cross-entropy: log(1 + e^{-l}) for bit 0, log(1 + e^{l}) for bit 1
double naive_loss(const std::vector<double>& l, const std::vector<std::uint8_t>& d, double lam1, double lam2)
{
    const std::size_t n_sym = l.size() / 3;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t n = 0; n < n_sym; ++n) {
        const double a = l[3 * n + 1], b = l[3 * n + 2];
        s1 += d[3 * n + 1] ? std::log(1.0 + std::exp(a)) : std::log(1.0 + std::exp(-a));
        s2 += d[3 * n + 2] ? std::log(1.0 + std::exp(b)) : std::log(1.0 + std::exp(-b));
    }
    return (lam1 * s1 + lam2 * s2) / static_cast<double>(n_sym);
}

// coded 8-PAM frames over AWGN
TrainingFrame make_frame(const ldpc::Code& code, double sigma, std::uint64_t index)
{
    auto rng = substream(42, "toy-frame", index);
    std::vector<std::uint8_t> info(code.k());
    for (auto& b : info)
        b = rng() & 1;
    TrainingFrame f;
    f.bits = code.encode(info);
    const auto c = chansim::Constellation::pam8_gray();
    auto x = chansim::map_bits(f.bits, c);
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& v : x)
        v += normal(rng);
    f.lR = chansim::soft_demap(x, c, chansim::rho_for_variance(sigma * sigma));
    return f;
}

}  // namespace

TEST_CASE("initialisation")
{
    const StageDims dims;
    CHECK(dims.nq == 40);
    CHECK(dims.nr == 40);
    auto r1 = substream(3, "init"), r2 = substream(3, "init");
    const auto a = init_stage(dims, r1, true), b = init_stage(dims, r2, true);
    CHECK(a.params == b.params);
    const NetLayout lay(dims);
    for (int m = 1; m < dims.M; ++m) {
        CHECK(a.net(m)[lay.b3] == 0.0);
        for (std::size_t i = lay.wB; i < lay.b1; ++i)
            CHECK(a.net(m)[i] == 0.0);
    }
    for (double v : a.params)
        CHECK(std::isfinite(v));

    // zero wB: a zero lB stream is the same as no lB stream
    const auto lR = random_llrs(60, 3.0, 1);
    const std::vector<double> zeros(60, 0.0);
    CHECK(stage_forward(a, lR, zeros) == stage_forward(a, lR, {}));

    StageDims bad = dims;
    bad.M = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("stage forward")
{
    StageDims dims;
    dims.L = 2;
    dims.nq = dims.nr = 5;
    const auto s = constant_stage(dims, 0.7);
    const auto lR = random_llrs(30, 4.0, 2);
    const auto lN = stage_forward(s, lR, {});
    for (std::size_t n = 0; n < 10; ++n) {
        CHECK(lN[3 * n] == lR[3 * n]);
        CHECK(lN[3 * n + 1] == 0.7);
        CHECK(lN[3 * n + 2] == 0.7);
    }

    // saturated inputs
    auto rng = substream(5, "sat");
    const auto r = init_stage(dims, rng, false);
    std::vector<double> big(30), bigger(30);
    for (std::size_t i = 0; i < 30; ++i) {
        big[i] = (i % 2 ? 100.0 : -100.0);
        bigger[i] = 10.0 * big[i];
    }
    const auto o1 = stage_forward(r, big, big), o2 = stage_forward(r, bigger, bigger);
    for (std::size_t i = 0; i < 30; ++i)
        if (i % 3)
            CHECK(std::abs(o1[i] - o2[i]) < 1e-6);

    CHECK_THROWS_AS(stage_forward(r, std::vector<double>(31), {}), Error);
    CHECK_THROWS_AS(stage_forward(r, big, std::vector<double>(27)), Error);
}

TEST_CASE("hand-evaluated single-symbol network")
{
    StageDims dims;
    dims.L = 0;
    dims.M = 2;
    dims.nq = dims.nr = 1;
    EqualizerStage s{dims, std::vector<double>(dims.stage_size())};
    const NetLayout lay(dims);
    double* p = s.net(1);
    p[lay.wR + 0] = 0.8;   // on bit 0 of the symbol
    p[lay.wR + 1] = -1.5;  // on bit 1
    p[lay.wB + 0] = 0.3;
    p[lay.wB + 1] = 0.6;
    p[lay.b1] = 0.2;
    p[lay.w2] = 1.7;
    p[lay.b2] = -0.1;
    p[lay.w3] = 2.5;
    p[lay.b3] = 0.4;
    const std::vector<double> lR{1.2, -0.9}, lB{-0.4, 2.0};
    const double q = std::max(0.0, 0.8 * std::tanh(0.6) - 1.5 * std::tanh(-0.45) + 0.3 * std::tanh(-0.2) +
                                       0.6 * std::tanh(1.0) + 0.2);
    const double r = std::max(0.0, 1.7 * q - 0.1);
    const auto lN = stage_forward(s, lR, lB);
    CHECK(lN[0] == 1.2);
    CHECK(lN[1] == doctest::Approx(2.5 * r + 0.4).epsilon(1e-14));
}

TEST_CASE("schedule and reduction to plain decoding")
{
    const auto code = test_codes::random_code(60, 12, 3, 7);
    StageDims dims;
    dims.L = 1;
    dims.nq = dims.nr = 4;
    const auto lR = random_llrs(60, 2.0, 9);

    Schedule one;
    one.n_stages = 1;
    one.n_res = 50;
    const std::vector<EqualizerStage> zero{constant_stage(dims, 0.0)};
    const auto f = full_forward(zero, one, lR, code);
    std::vector<double> masked(60, 0.0);
    for (std::size_t n = 0; n < 20; ++n)
        masked[3 * n] = lR[3 * n];
    const auto ref = ldpc::decode(masked, code, {50, false});
    CHECK(f.lB == ref.llr);
    CHECK(f.iterations == 50);

    const Schedule three;
    CHECK(three.total_iterations() == 50);
    auto rng = substream(1, "s");
    std::vector<EqualizerStage> st;
    for (int k = 0; k < 3; ++k)
        st.push_back(init_stage(dims, rng, k == 0));
    const auto g = full_forward(st, three, lR, code, {true, false});
    CHECK(g.iterations == 50);
    CHECK(g.records.size() == 3);
    CHECK(g.records[0].bp.size() == 5);
    CHECK(g.records[2].bp.size() == 40);
    CHECK(full_forward(st, three, lR, code).lB == g.lB);
    CHECK_THROWS_AS(full_forward(zero, three, lR, code), Error);
}

TEST_CASE("loss")
{
    const Schedule s;
    const std::vector<double> zero(30, 0.0);
    const auto bits = random_bits(30, 3);
    CHECK(loss(zero, bits, s, 3) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));

    std::vector<double> l(3, 30.0);
    const std::vector<std::uint8_t> d(3, 0);
    CHECK(loss(l, d, s, 3) == doctest::Approx(2.0 * 9.357622968839299e-14).epsilon(1e-6));

    Schedule w;
    w.lambda1 = 0.7;
    w.lambda2 = 1.9;
    const auto r = random_llrs(300, 5.0, 4);
    const auto rb = random_bits(300, 4);
    CHECK(loss(r, rb, w, 3) == doctest::Approx(naive_loss(r, rb, 0.7, 1.9)).epsilon(1e-12));
    CHECK(loss(r, rb, w, 3) >= 0.0);

    // analytic gradient vs central differences
    const auto g = loss_gradient(r, rb, w, 3);
    for (std::size_t i = 0; i < 30; ++i) {
        auto up = r, dn = r;
        up[i] += 1e-5;
        dn[i] -= 1e-5;
        CHECK(g[i] == doctest::Approx((loss(up, rb, w, 3) - loss(dn, rb, w, 3)) / 2e-5).epsilon(1e-6));
    }
}

namespace {

using nnbp_fd::random_stage;

double fd_check(const std::vector<EqualizerStage>& stages, const Schedule& sched, const std::vector<double>& lR,
                const std::vector<std::uint8_t>& bits, const ldpc::Code& code, std::size_t stage, double& largest)
{
    double worst = 0.0;
    largest = 0.0;
    for (const auto& c : nnbp_fd::compare(stages, sched, lR, bits, code, stage)) {
        largest = std::max(largest, std::abs(c.analytic));
        worst = std::max(worst, c.rel_error());
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients match finite differences on the toy configuration")
{
    // 21 symbols of 3 bits, one stage, two BP iterations
    const auto code = test_codes::random_code(63, 15, 3, 11);
    StageDims dims;
    dims.L = 2;
    dims.nq = 6;
    dims.nr = 5;
    dims.stride = 2;
    Schedule sched;
    sched.n_stages = 1;
    sched.n_res = 2;
    sched.lambda1 = 1.0;
    sched.lambda2 = 0.6;
    std::vector<EqualizerStage> stages{random_stage(dims, 2)};
    const auto lR = random_llrs(63, 2.5, 13);
    const auto bits = random_bits(63, 13);
    double largest = 0.0;
    const double err = fd_check(stages, sched, lR, bits, code, 0, largest);
    CHECK(largest > 1e-3);
    CHECK(err < 1e-4);
}

TEST_CASE("gradients through a stage chain")
{
    const auto code = test_codes::random_code(45, 12, 3, 21);
    StageDims dims;
    dims.L = 1;
    dims.nq = 4;
    dims.nr = 3;
    Schedule sched;
    sched.n_stages = 2;
    sched.n_bn = 2;
    sched.n_res = 2;
    std::vector<EqualizerStage> stages{random_stage(dims, 8), random_stage(dims, 9)};
    const auto lR = random_llrs(45, 2.0, 5);
    const auto bits = random_bits(45, 5);
    double largest = 0.0;
    CHECK(fd_check(stages, sched, lR, bits, code, 0, largest) < 1e-4);
    CHECK(largest > 1e-4);
    CHECK(fd_check(stages, sched, lR, bits, code, 1, largest) < 1e-4);

    // extrinsic feedback: stage 1 also reaches the loss through the subtracted lN
    sched.feedback = Feedback::extrinsic;
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(fd_check(stages, sched, lR, bits, code, k, largest) < 1e-4);
        CHECK(largest > 1e-5);  // difference noise is ~1e-11
    }
    const auto fwd = full_forward(stages, sched, lR, code, {true, false});
    const auto lN0 = stage_forward(stages[0], lR, {});
    for (std::size_t i = 0; i < lR.size(); ++i)
        CHECK(fwd.records[1].lB_in[i] == doctest::Approx(fwd.stage_lB[0][i] - lN0[i]).epsilon(1e-12));
}

TEST_CASE("gradient special cases")
{
    const auto code = test_codes::random_code(45, 12, 3, 21);
    StageDims dims;
    dims.L = 1;
    dims.nq = dims.nr = 3;
    Schedule sched;
    sched.n_stages = 1;
    sched.n_res = 3;
    sched.lambda1 = sched.lambda2 = 0.0;
    const std::vector<EqualizerStage> stages{random_stage(dims, 4)};
    const auto lR = random_llrs(45, 2.0, 6);
    const auto bits = random_bits(45, 6);
    auto fwd = full_forward(stages, sched, lR, code, {true, false});
    const auto zero_grads = backward(stages, sched, fwd, bits, code);
    for (double g : zero_grads[0])
        CHECK(g == 0.0);

    // loss on bit 1 only: the bit-2 network still receives gradient through the checks
    sched.lambda1 = 1.0;
    fwd = full_forward(stages, sched, lR, code, {true, false});
    const auto g = backward(stages, sched, fwd, bits, code)[0];
    const std::size_t net = dims.net_size();
    double bit2 = 0.0;
    for (std::size_t i = net; i < 2 * net; ++i)
        bit2 = std::max(bit2, std::abs(g[i]));
    CHECK(bit2 > 1e-8);
    double largest = 0.0;
    CHECK(fd_check(stages, sched, lR, bits, code, 0, largest) < 1e-4);
}

TEST_CASE("training reduces the loss")
{
    const auto code = test_codes::random_code(150, 30, 3, 31);
    StageDims dims;
    dims.L = 1;
    dims.nq = dims.nr = 8;
    Schedule sched;
    sched.n_stages = 2;
    sched.n_bn = 3;
    sched.n_res = 3;
    TrainOptions opt;
    opt.frames = 32;
    opt.batch = 4;
    opt.epochs = 2;
    opt.learning_rate = 3e-3;
    auto provider = [&](std::uint64_t i) { return make_frame(code, 0.2, i); };
    const auto res = train(dims, sched, code, provider, opt);
    REQUIRE(res.loss_trace.size() == 2);
    for (const auto& t : res.loss_trace) {
        CHECK(t.size() == 3);
        CHECK(t[1] <= t[0]);
    }
    const auto again = train(dims, sched, code, provider, opt);
    CHECK(again.stages[1].params == res.stages[1].params);

    // warm start without training: stage 2 is a copy of stage 1
    opt.warm_start = true;
    opt.epochs = 0;
    const auto copy = train(dims, sched, code, provider, opt);
    CHECK(copy.stages[1].params == copy.stages[0].params);
    opt.warm_start = false;
    CHECK(train(dims, sched, code, provider, opt).stages[1].params != copy.stages[0].params);

    // resampling: every (stage, epoch > 0) draws its own frames; the trace stays on the first set
    opt.epochs = 3;
    opt.resample = true;
    std::set<std::uint64_t> seen;
    auto counting = [&](std::uint64_t i) {
#pragma omp critical
        seen.insert(i);
        return make_frame(code, 0.2, i);
    };
    const auto fresh = train(dims, sched, code, counting, opt);
    CHECK(seen.size() == opt.frames * (1 + 2 * 2));
    CHECK(*seen.rbegin() == (1 * 3 + 2) * opt.frames + opt.frames - 1);
    opt.resample = false;
    const auto fixed = train(dims, sched, code, provider, opt);
    CHECK(fresh.stages[0].params != fixed.stages[0].params);
    CHECK(fresh.loss_trace[0][0] == fixed.loss_trace[0][0]);

    // a final rate equal to the initial one is the constant schedule
    opt.learning_rate_final = opt.learning_rate;
    CHECK(train(dims, sched, code, provider, opt).stages[1].params == fixed.stages[1].params);
    opt.learning_rate_final = opt.learning_rate / 30.0;
    const auto decayed = train(dims, sched, code, provider, opt);
    CHECK(decayed.stages[1].params != fixed.stages[1].params);
    CHECK(decayed.loss_trace[0][1] == fixed.loss_trace[0][1]);  // first epoch runs at the full rate
}

TEST_CASE("weight files")
{
    StageDims dims;
    dims.L = 2;
    dims.nq = 5;
    dims.nr = 4;
    dims.stride = 2;
    Schedule sched;
    sched.n_stages = 2;
    sched.lambda2 = 0.25;
    auto rng = substream(6, "w");
    std::vector<EqualizerStage> st{init_stage(dims, rng, true), init_stage(dims, rng, false)};
    const std::string path = "nnbp_roundtrip.txt";
    write_weights(st, sched, path);
    const auto w = read_weights(path);
    CHECK(w.schedule.n_stages == 2);
    CHECK(w.schedule.lambda2 == 0.25);
    REQUIRE(w.stages.size() == 2);
    CHECK(w.stages[0].dims == dims);
    CHECK(w.stages[0].params == st[0].params);
    CHECK(w.stages[1].params == st[1].params);
    CHECK(w.schedule.feedback == Feedback::posterior);
    sched.feedback = Feedback::extrinsic;
    write_weights(st, sched, path);
    CHECK(read_weights(path).schedule.feedback == Feedback::extrinsic);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_weights("no/such/file"), Error);
    CHECK_THROWS_AS(write_weights(st, Schedule{}, path), Error);
}
