#include "nleq/volterra/volterra.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <omp.h>

#include "nleq/common.hpp"

namespace nleq::volterra {

IndexSet build_index_set(int memory)
{
    if (memory < 0)
        throw invalid_input("volterra: memory must be >= 0");
    IndexSet s;
    s.memory = memory;
    for (int i = memory; i >= -memory; --i)
        for (int j = i; j >= -memory; --j)
            for (int k = j; k >= -memory; --k)
                s.triples.push_back({i, j, k});
    return s;
}

std::size_t index_set_size(int memory)
{
    const std::size_t m = static_cast<std::size_t>(2 * memory + 3);
    return m * (m - 1) * (m - 2) / 6;
}

void build_features(std::span<const double> y, std::size_t n, const IndexSet& iset, std::span<double> y1,
                    std::span<double> y3)
{
    const auto L = static_cast<std::size_t>(iset.memory);
    if (n < L || n + L >= y.size())
        throw range_error("volterra: feature window around symbol " + std::to_string(n) + " leaves the sequence");
    const double* c = y.data() + n;
    for (int i = -iset.memory; i <= iset.memory; ++i)
        y1[static_cast<std::size_t>(i + iset.memory)] = c[i];
    for (std::size_t t = 0; t < iset.triples.size(); ++t) {
        const auto& tr = iset.triples[t];
        y3[t] = c[tr.i] * c[tr.j] * c[tr.k];
    }
}

Features build_features(std::span<const double> y, std::size_t n, const IndexSet& iset)
{
    Features f{std::vector<double>(iset.linear_size()), std::vector<double>(iset.cubic_size())};
    build_features(y, n, iset, f.y1, f.y3);
    return f;
}

VolterraModel VolterraModel::pass_through(int memory)
{
    VolterraModel m;
    m.iset = build_index_set(memory);
    m.h1.assign(m.iset.linear_size(), 0.0);
    m.h1[static_cast<std::size_t>(memory)] = 1.0;
    m.h3.assign(m.iset.cubic_size(), 0.0);
    return m;
}

GramAccumulator::GramAccumulator(const IndexSet& iset)
    : iset_(iset), gram_(Eigen::MatrixXd::Zero(iset.dim(), iset.dim())), cross_(Eigen::VectorXd::Zero(iset.dim()))
{
}

void GramAccumulator::add(std::span<const double> y, std::size_t first, std::span<const double> x)
{
    constexpr std::size_t chunk = 256;
    const std::size_t d = iset_.dim(), l1 = iset_.linear_size();
    Eigen::MatrixXd f(d, chunk);
    for (std::size_t start = 0; start < x.size(); start += chunk) {
        const std::size_t rows = std::min(chunk, x.size() - start);
        for (std::size_t r = 0; r < rows; ++r) {
            double* col = f.col(static_cast<Eigen::Index>(r)).data();
            build_features(y, first + start + r, iset_, {col, l1}, {col + l1, d - l1});
        }
        const auto block = f.leftCols(static_cast<Eigen::Index>(rows));
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(block);
        const Eigen::Map<const Eigen::VectorXd> xs(x.data() + start, static_cast<Eigen::Index>(rows));
        cross_.noalias() += block * xs;
        xx_ += xs.squaredNorm();
    }
    count_ += x.size();
}

void GramAccumulator::merge(const GramAccumulator& other)
{
    if (other.iset_.memory != iset_.memory)
        throw invalid_input("volterra: merging statistics of different memory");
    gram_ += other.gram_;
    cross_ += other.cross_;
    xx_ += other.xx_;
    count_ += other.count_;
}

Eigen::MatrixXd GramAccumulator::gram() const
{
    return gram_.selfadjointView<Eigen::Lower>();
}

namespace {

VolterraModel solve(const IndexSet& iset, const Eigen::MatrixXd& r, const Eigen::VectorXd& p)
{
    const auto d = r.rows();
    const double lambda = 1e-8 * r.trace() / static_cast<double>(d);
    Eigen::MatrixXd reg = r;
    reg.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(reg, Eigen::EigenvaluesOnly).eigenvalues();
        std::ostringstream msg;
        msg << "volterra: normal matrix is not positive definite after ridge (condition estimate "
            << ev.maxCoeff() / std::max(ev.minCoeff(), 1e-300) << ")";
        throw numerical_error(msg.str());
    }
    Eigen::VectorXd h = ldlt.solve(p);
    // remove the ridge bias
    const double scale = p.norm();
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd res = p - r * h;
        if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(scale, 1e-300))
            break;
        h += ldlt.solve(res);
    }
    if (!h.allFinite())
        throw numerical_error("volterra: weight solve produced non-finite values");
    VolterraModel m;
    m.iset = iset;
    const auto l1 = static_cast<Eigen::Index>(iset.linear_size());
    m.h1.assign(h.data(), h.data() + l1);
    m.h3.assign(h.data() + l1, h.data() + d);
    return m;
}

}  // namespace

VolterraModel fit_mmse(const GramAccumulator& acc)
{
    if (acc.count() < 10 * acc.index_set().dim())
        throw invalid_input("volterra: need at least 10 training symbols per feature");
    return solve(acc.index_set(), acc.gram(), acc.cross());
}

VolterraModel fit_mmse(const IndexSet& iset, const Eigen::MatrixXd& Y1, const Eigen::MatrixXd& Y3,
                       const Eigen::VectorXd& x)
{
    if (Y1.cols() != static_cast<Eigen::Index>(iset.linear_size()) ||
        Y3.cols() != static_cast<Eigen::Index>(iset.cubic_size()) || Y1.rows() != x.size() || Y3.rows() != x.size())
        throw invalid_input("volterra: feature matrix shapes do not match the index set");
    if (static_cast<std::size_t>(x.size()) < 10 * iset.dim())
        throw invalid_input("volterra: need at least 10 training symbols per feature");
    Eigen::MatrixXd f(x.size(), static_cast<Eigen::Index>(iset.dim()));
    f << Y1, Y3;
    return solve(iset, f.transpose() * f, f.transpose() * x);
}

void apply(const VolterraModel& model, std::span<const double> y, std::size_t first, std::span<double> out)
{
    const int L = model.memory();
    if (first < static_cast<std::size_t>(L) || first + out.size() + static_cast<std::size_t>(L) > y.size())
        throw range_error("volterra: output range needs a full window on both sides");
    const auto& tr = model.iset.triples;
    for (std::size_t t = 0; t < out.size(); ++t) {
        const double* c = y.data() + first + t;
        double acc = 0.0;
        for (int i = -L; i <= L; ++i)
            acc += model.h1[static_cast<std::size_t>(i + L)] * c[i];
        for (std::size_t q = 0; q < tr.size(); ++q)
            acc += model.h3[q] * c[tr[q].i] * c[tr[q].j] * c[tr[q].k];
        out[t] = acc;
    }
}

std::vector<double> apply(const VolterraModel& model, std::span<const double> y)
{
    std::vector<double> out(y.begin(), y.end());
    const auto L = static_cast<std::size_t>(model.memory());
    if (y.size() > 2 * L)
        apply(model, y, L, std::span<double>(out).subspan(L, y.size() - 2 * L));
    return out;
}

chansim::SymbolEqualizer as_equalizer(const VolterraModel& model)
{
    return [model](std::span<const double> y, std::size_t first, std::span<double> out) { apply(model, y, first, out); };
}

double nonlinearity_ratio(const VolterraModel& model, double ew2)
{
    double n1 = 0.0, n3 = 0.0;
    for (double v : model.h1)
        n1 += v * v;
    for (double v : model.h3)
        n3 += v * v;
    return ew2 * std::sqrt(n3) / std::sqrt(n1);
}

namespace {

void add_block(GramAccumulator& acc, const chansim::Link& link, const TrainOptions& opt, std::size_t b)
{
    auto sym_rng = substream(opt.seed, "volterra-symbols", b);
    auto noise_rng = substream(opt.seed, "volterra-noise", b);
    const auto x = link.random_symbols(opt.block_symbols, sym_rng);
    const auto block = link.transmit(x, noise_rng);
    acc.add(block.observed(), block.guard, x);
}

void check_link(const chansim::Link& link, const TrainOptions& opt)
{
    if (opt.n_blocks < 1 || opt.block_symbols < 1)
        throw invalid_input("volterra: need at least one training block");
    if (link.guard() < static_cast<std::size_t>(opt.memory))
        throw invalid_input("volterra: link guard is shorter than the equalizer memory");
}

}  // namespace

GramAccumulator collect_training(const chansim::Link& link, const TrainOptions& opt)
{
    check_link(link, opt);
    const auto iset = build_index_set(opt.memory);
    constexpr int slots = 16;
    std::vector<GramAccumulator> partial(slots, GramAccumulator(iset));
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < slots; ++s)
        for (std::size_t b = static_cast<std::size_t>(s); b < opt.n_blocks; b += slots)
            add_block(partial[static_cast<std::size_t>(s)], link, opt, b);
    GramAccumulator acc(iset);
    for (const auto& p : partial)
        acc.merge(p);
    return acc;
}

GramAccumulator collect_training_serial(const chansim::Link& link, const TrainOptions& opt)
{
    check_link(link, opt);
    GramAccumulator acc(build_index_set(opt.memory));
    for (std::size_t b = 0; b < opt.n_blocks; ++b)
        add_block(acc, link, opt, b);
    return acc;
}

VolterraModel train_at_snr(const chansim::ChannelConfig& cfg, double snr_db, const TrainOptions& opt)
{
    auto c = cfg;
    c.snr_db = snr_db;
    const chansim::Link link(c, chansim::default_guard(c, opt.memory));
    auto model = fit_mmse(collect_training(link, opt));
    model.train_snr_db = snr_db;
    return model;
}

void write_model(const VolterraModel& model, const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw invalid_input("cannot write " + path);
    f << "volterra " << model.memory() << ' ' << std::setprecision(17) << model.train_snr_db << '\n';
    for (double v : model.h1)
        f << v << '\n';
    for (double v : model.h3)
        f << v << '\n';
}

VolterraModel read_model(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw invalid_input("cannot open " + path);
    std::string tag, snr;
    int memory = -1;
    if (!(f >> tag >> memory >> snr) || tag != "volterra" || memory < 0)
        throw invalid_input(path + ": not a volterra weight file");
    VolterraModel m;
    m.iset = build_index_set(memory);
    m.train_snr_db = (snr == "inf") ? kInf : std::stod(snr);
    m.h1.resize(m.iset.linear_size());
    m.h3.resize(m.iset.cubic_size());
    for (auto* v : {&m.h1, &m.h3})
        for (double& w : *v)
            if (!(f >> w))
                throw invalid_input(path + ": truncated weight file");
    return m;
}

}  // namespace nleq::volterra
