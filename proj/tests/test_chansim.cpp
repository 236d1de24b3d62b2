#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nleq/chansim/channel.hpp"
#include "nleq/chansim/constellation.hpp"
#include "nleq/chansim/demapper.hpp"
#include "nleq/chansim/link.hpp"
#include "nleq/chansim/receiver.hpp"

using namespace nleq;
using namespace nleq::chansim;

TEST_CASE("pam8 gray constellation invariants")
{
    const auto c = Constellation::pam8_gray();
    REQUIRE(c.size() == 8);
    double power = 0.0;
    for (double v : c.levels())
        power += v * v;
    CHECK(std::abs(power / 8.0 - 1.0) < 1e-12);

    for (int m = 0; m < 3; ++m) {
        CHECK(c.partition(m, 0).size() == 4);
        CHECK(c.partition(m, 1).size() == 4);
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double x = c.levels()[i];
        CHECK((c.label_bit(i, 0) == 0) == (x > 0));
        bool mirrored = false;
        for (double v : c.levels())
            mirrored = mirrored || std::abs(v + x) < 1e-15;
        CHECK(mirrored);
    }
    // Gray: neighbouring levels differ in exactly one bit.
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
        CHECK(std::popcount(static_cast<unsigned>(c.label(i) ^ c.label(i + 1))) == 1);
}

TEST_CASE("map_bits follows the mapping table")
{
    const auto c = Constellation::pam8_gray();
    const std::vector<std::uint8_t> b0{0, 0, 0};
    const std::vector<std::uint8_t> b1{1, 1, 0};
    CHECK(map_bits(b0, c)[0] == doctest::Approx(1.0 / std::sqrt(21.0)).epsilon(1e-15));
    // sign bit 1, (d1,d2) = (1,0) is the fourth Gray pair -> magnitude 7
    CHECK(map_bits(b1, c)[0] == doctest::Approx(-7.0 / std::sqrt(21.0)).epsilon(1e-15));
    const std::vector<std::uint8_t> b2{1, 1, 1};
    CHECK(map_bits(b2, c)[0] == doctest::Approx(-5.0 / std::sqrt(21.0)).epsilon(1e-15));

    std::vector<std::uint8_t> all;
    for (unsigned t = 0; t < 8; ++t)
        for (int m = 0; m < 3; ++m)
            all.push_back(static_cast<std::uint8_t>((t >> m) & 1));
    CHECK(hard_decide(map_bits(all, c), c) == all);

    const std::vector<std::uint8_t> bad{0, 2, 0};
    CHECK_THROWS_AS(map_bits(bad, c), Error);
    const std::vector<std::uint8_t> short_group{0, 1};
    CHECK_THROWS_AS(map_bits(short_group, c), Error);
}

TEST_CASE("rrc taps are unit energy and the cascade is nearly ISI free")
{
    const ChannelConfig cfg;
    const auto g = rrc_taps(cfg.sps, cfg.rolloff, cfg.rrc_span_symbols);
    REQUIRE(g.size() == 81);
    const double energy = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    CHECK(std::abs(energy - 1.0) < 1e-12);

    // Oracle: full convolution of the two tap vectors, sampled every sps samples.
    std::vector<double> cascade(2 * g.size() - 1, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            cascade[i + j] += g[i] * g[j];
    const std::size_t centre = g.size() - 1;
    CHECK(std::abs(cascade[centre] - 1.0) < 1e-12);
    double worst = 0.0;
    for (std::size_t k = 2; k <= centre; k += 2) {
        worst = std::max(worst, std::abs(cascade[centre + k]));
        worst = std::max(worst, std::abs(cascade[centre - k]));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("sinusoidal nonlinearity")
{
    FrameSignal s;
    s.samples = {0.0, 0.5, -0.5};
    const auto out = apply_nonlinearity(s, 100.0);
    CHECK(out.samples[0] == 0.0);
    CHECK(std::abs(out.samples[1] / 0.5 - 1.0) < 1e-4);
    CHECK(out.samples[2] == -out.samples[1]);
    CHECK(apply_nonlinearity(s, kInf).samples == s.samples);
    CHECK_THROWS_AS(apply_nonlinearity(s, 0.0), Error);

    // monotone on |u| <= A pi / 2
    const double a = 1.2;
    FrameSignal ramp;
    for (int i = -100; i <= 100; ++i)
        ramp.samples.push_back(a * 1.5707 * i / 100.0);
    const auto r = apply_nonlinearity(ramp, a);
    for (std::size_t i = 1; i < r.samples.size(); ++i)
        CHECK(r.samples[i] > r.samples[i - 1]);
}

TEST_CASE("awgn power and determinism")
{
    ChannelConfig cfg;
    auto rng = substream(7, "noise");
    const auto noise = awgn(1'000'000, 2, 12.0, rng);
    const LinearReceiver rx(cfg);
    const auto z = rx.receive(noise);
    double p = 0.0;
    for (std::size_t i = 100; i + 100 < z.size(); ++i)
        p += z[i] * z[i];
    p /= static_cast<double>(z.size() - 200);
    CHECK(std::abs(10.0 * std::log10(p / std::pow(10.0, -1.2))) < 0.1);

    FrameSignal s;
    s.sps = 2;
    s.samples.assign(64, 0.25);
    auto r1 = substream(3, "noise");
    auto r2 = substream(3, "noise");
    CHECK(add_awgn(s, 10.0, r1).samples == add_awgn(s, 10.0, r2).samples);
    auto r3 = substream(3, "noise");
    CHECK(add_awgn(s, kInf, r3).samples == s.samples);
}

TEST_CASE("linear receiver on an identity channel")
{
    ChannelConfig cfg;
    const Link link(cfg, default_guard(cfg, 4));
    auto sym_rng = substream(11, "symbols");
    auto noise_rng = substream(11, "noise");
    const auto x = link.random_symbols(4000, sym_rng);
    const auto block = link.transmit(x, noise_rng);
    double err = 0.0, power = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double e = block.signal[block.guard + n] - x[n];
        err += e * e;
        power += x[n] * x[n];
    }
    CHECK(err / power < 1e-4);
}

TEST_CASE("fitted FIR beats every single-tap scaling on its pilot block")
{
    ChannelConfig cfg;
    cfg.nl_amplitude = 1.0;
    cfg.snr_db = 18.0;
    auto sym_rng = substream(5, "pilots");
    auto noise_rng = substream(5, "noise");
    const Link ref(cfg, 8);
    const auto pilots = ref.random_symbols(2000, sym_rng);
    const auto received = add_awgn(ref.channel_output(pilots), cfg.snr_db, noise_rng);
    const auto rx = LinearReceiver::fit(cfg, received, pilots, 8);
    const auto y = rx.receive(received);
    const auto mf = LinearReceiver(cfg).receive(received);  // centre tap only

    double mse_fit = 0.0, xy = 0.0, yy = 0.0;
    for (std::size_t n = 0; n < pilots.size(); ++n) {
        const double e = y[8 + n] - pilots[n];
        mse_fit += e * e;
        xy += mf[8 + n] * pilots[n];
        yy += mf[8 + n] * mf[8 + n];
    }
    const double scale = xy / yy;
    double mse_scale = 0.0;
    for (std::size_t n = 0; n < pilots.size(); ++n) {
        const double e = scale * mf[8 + n] - pilots[n];
        mse_scale += e * e;
    }
    CHECK(mse_fit <= mse_scale);

    const std::vector<double> too_short(100, 1.0);
    CHECK_THROWS_AS(LinearReceiver::fit(cfg, received, too_short), Error);
}

namespace {

// Independent re-evaluation of the two-set log-sum-exp LLR.
double brute_llr(double xhat, double rho, const Constellation& c, int m)
{
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = xhat - c.levels()[i];
        (c.label_bit(i, m) ? s1 : s0) += std::exp(-rho * d * d);
    }
    return std::log(s0) - std::log(s1);
}

}  // namespace

TEST_CASE("soft demapper")
{
    const Constellation bpsk({-1.0, 1.0}, {1, 0}, 1);
    const std::vector<double> xhat{0.5};
    CHECK(soft_demap(xhat, bpsk, 1.0)[0] == doctest::Approx(2.0).epsilon(1e-14));

    const auto c = Constellation::pam8_gray();
    const std::vector<double> zero{0.0};
    CHECK(soft_demap(zero, c, 3.0)[0] == doctest::Approx(0.0));

    const std::vector<double> probe{0.3};
    const auto l = soft_demap(probe, c, 10.0);
    for (int m = 0; m < 3; ++m)
        CHECK(l[m] == doctest::Approx(brute_llr(0.3, 10.0, c, m)).epsilon(1e-12));

    // sign consistency at constellation points
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::vector<double> at{c.levels()[i]};
        const auto li = soft_demap(at, c, 50.0);
        for (int m = 0; m < 3; ++m)
            CHECK((li[m] > 0) == (c.label_bit(i, m) == 0));
    }

    // clamp
    const std::vector<double> far{40.0};
    for (double v : soft_demap(far, c, 100.0))
        CHECK(std::abs(v) <= kLlrMax);
    CHECK_THROWS_AS(soft_demap(probe, c, 0.0), Error);
}

TEST_CASE("variants a and c")
{
    ChannelConfig cfg;
    cfg.nl_amplitude = 1.1;
    cfg.snr_db = kInf;
    const Link quiet(cfg, default_guard(cfg, 4));
    auto bit_rng = substream(1, "bits");
    std::vector<std::uint8_t> bits(600);
    for (auto& b : bits)
        b = static_cast<std::uint8_t>(bit_rng() & 1);

    const auto cube = [](std::span<const double> y, std::size_t first, std::span<double> out) {
        for (std::size_t n = 0; n < out.size(); ++n) {
            const double v = y[first + n];
            out[n] = v + 0.05 * v * v * v;
        }
    };
    auto r1 = substream(1, "noise");
    auto r2 = substream(1, "noise");
    const auto a = run_variant(Variant::a, quiet, bits, cube, 20.0, r1);
    const auto c = run_variant(Variant::c, quiet, bits, cube, 20.0, r2);
    CHECK(a.xhat == c.xhat);
    CHECK(a.llr == c.llr);

    auto r3 = substream(1, "noise");
    CHECK_THROWS_AS(run_variant(Variant::b, quiet, bits, cube, 20.0, r3), Error);
    CHECK_THROWS_AS(parse_variant("d"), Error);

    // variant c feeds the equalizer the noise-free input of variant a
    cfg.snr_db = 15.0;
    const Link noisy(cfg, default_guard(cfg, 4));
    const auto x = map_bits(bits, noisy.constellation());
    auto r4 = substream(2, "noise");
    const auto block = noisy.transmit(x, r4);
    std::vector<double> seen;
    const auto spy = [&](std::span<const double> y, std::size_t first, std::span<double> out) {
        seen.assign(y.begin() + static_cast<std::ptrdiff_t>(first),
                    y.begin() + static_cast<std::ptrdiff_t>(first + out.size()));
        std::fill(out.begin(), out.end(), 0.0);
    };
    noisy.equalize(block, Variant::c, spy);
    CHECK(std::equal(seen.begin(), seen.end(), block.signal.begin() + static_cast<std::ptrdiff_t>(block.guard)));
}

TEST_CASE("odd symmetry end to end")
{
    ChannelConfig cfg;
    cfg.nl_amplitude = 1.0;
    cfg.snr_db = 16.0;
    const Link link(cfg, 8);
    auto rng = substream(9, "symbols");
    auto x = link.random_symbols(300, rng);
    auto neg = x;
    for (double& v : neg)
        v = -v;
    auto n1 = substream(9, "noise");
    auto n2 = substream(9, "noise");
    const auto p = link.transmit(x, n1);
    const auto q = link.transmit(neg, n2);
    for (std::size_t i = 0; i < p.signal.size(); ++i) {
        CHECK(q.signal[i] == -p.signal[i]);
        // same noise realisation negated gives exactly the negated receiver output by linearity
        CHECK(q.noise[i] == p.noise[i]);
    }
}

TEST_CASE("channel config validation")
{
    ChannelConfig cfg;
    cfg.fir_len = 16;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.rolloff = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.sps = 1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.nl_amplitude = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
