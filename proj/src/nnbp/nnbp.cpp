#include "nleq/nnbp/nnbp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "nleq/common.hpp"

namespace nleq::nnbp {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::size_t StageDims::net_size() const { return NetLayout(*this).size; }

void StageDims::validate() const
{
    if (L < 0 || M < 2 || nq < 1 || nr < 1 || stride < 1)
        throw invalid_input("nnbp: need L >= 0, M >= 2, nq, nr, stride >= 1");
}

NetLayout::NetLayout(const StageDims& d)
{
    const auto in = static_cast<std::size_t>(d.input_size());
    const auto q = static_cast<std::size_t>(d.nq), r = static_cast<std::size_t>(d.nr);
    wR = 0;
    wB = wR + q * in;
    b1 = wB + q * in;
    w2 = b1 + q;
    b2 = w2 + r * q;
    w3 = b2 + r;
    b3 = w3 + r;
    size = b3 + 1;
}

void Schedule::validate() const
{
    if (n_stages < 1 || n_bn < 1 || n_res < 1)
        throw invalid_input("nnbp: schedule needs n_stages, n_bn, n_res >= 1");
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || lambda1 < 0.0 || lambda2 < 0.0)
        throw invalid_input("nnbp: loss weights must be finite and nonnegative");
}

double Schedule::lambda(int m) const { return m == 0 ? 0.0 : (m == 1 ? lambda1 : lambda2); }

EqualizerStage init_stage(const StageDims& dims, Rng& rng, bool first_stage)
{
    dims.validate();
    const NetLayout lay(dims);
    EqualizerStage s{dims, std::vector<double>(dims.stage_size(), 0.0)};
    const double in = dims.input_size() * (first_stage ? 1.0 : 2.0);
    auto fill = [&](double* p, std::size_t count, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < count; ++i)
            p[i] = u(rng);
    };
    const auto n_in = static_cast<std::size_t>(dims.input_size());
    const auto q = static_cast<std::size_t>(dims.nq), r = static_cast<std::size_t>(dims.nr);
    for (int m = 1; m < dims.M; ++m) {
        double* p = s.net(m);
        fill(p + lay.wR, q * n_in, std::sqrt(6.0 / in));
        if (!first_stage)
            fill(p + lay.wB, q * n_in, std::sqrt(6.0 / in));
        fill(p + lay.w2, r * q, std::sqrt(6.0 / static_cast<double>(q)));
        fill(p + lay.w3, r, 1e-2);
    }
    return s;
}

EqualizerStage constant_stage(const StageDims& dims, double b3)
{
    dims.validate();
    EqualizerStage s{dims, std::vector<double>(dims.stage_size(), 0.0)};
    const NetLayout lay(dims);
    for (int m = 1; m < dims.M; ++m)
        s.net(m)[lay.b3] = b3;
    return s;
}

namespace {

// tanh(l/2) over the window of every symbol; zero outside the frame
MatrixXd windows(const StageDims& d, std::span<const double> l, std::size_t n_sym)
{
    MatrixXd W = MatrixXd::Zero(d.input_size(), static_cast<Eigen::Index>(n_sym));
    if (l.empty())
        return W;
    const auto M = static_cast<std::size_t>(d.M);
    for (std::size_t n = 0; n < n_sym; ++n)
        for (int i = -d.L; i <= d.L; ++i) {
            const auto s = static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(d.stride) * i;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(n_sym))
                continue;
            for (std::size_t j = 0; j < M; ++j)
                W(static_cast<Eigen::Index>((i + d.L) * d.M) + static_cast<Eigen::Index>(j),
                  static_cast<Eigen::Index>(n)) = std::tanh(0.5 * l[static_cast<std::size_t>(s) * M + j]);
        }
    return W;
}

void check_frame(const StageDims& d, std::span<const double> lR, std::span<const double> lB)
{
    if (lR.empty() || lR.size() % static_cast<std::size_t>(d.M) != 0)
        throw invalid_input("nnbp: frame length must be a positive multiple of M");
    if (!lB.empty() && lB.size() != lR.size())
        throw invalid_input("nnbp: lR and lB frames differ in shape");
}

}  // namespace

std::vector<double> stage_forward(const EqualizerStage& stage, std::span<const double> lR, std::span<const double> lB,
                                  StageActivations* act)
{
    const auto& d = stage.dims;
    check_frame(d, lR, lB);
    if (stage.params.size() != d.stage_size())
        throw invalid_input("nnbp: parameter count does not match the stage dimensions");
    const NetLayout lay(d);
    const auto M = static_cast<std::size_t>(d.M);
    const std::size_t n_sym = lR.size() / M;
    const auto N = static_cast<Eigen::Index>(n_sym);
    const auto in = d.input_size();

    StageActivations local;
    StageActivations& a = act ? *act : local;
    a.U = windows(d, lR, n_sym);
    a.V = windows(d, lB, n_sym);
    a.Q.assign(M - 1, {});
    a.R.assign(M - 1, {});
    const bool has_b = !lB.empty();

    std::vector<double> lN(lR.size());
    for (std::size_t n = 0; n < n_sym; ++n)
        lN[n * M] = lR[n * M];
    for (int m = 1; m < d.M; ++m) {
        const double* p = stage.net(m);
        const Map<const MatrixXd> wR(p + lay.wR, d.nq, in), wB(p + lay.wB, d.nq, in), w2(p + lay.w2, d.nr, d.nq);
        const Map<const VectorXd> b1(p + lay.b1, d.nq), b2(p + lay.b2, d.nr), w3(p + lay.w3, d.nr);
        auto& Q = a.Q[static_cast<std::size_t>(m - 1)];
        auto& R = a.R[static_cast<std::size_t>(m - 1)];
        Q.noalias() = wR * a.U;
        if (has_b)
            Q.noalias() += wB * a.V;
        Q = (Q.colwise() + b1).cwiseMax(0.0);
        R.noalias() = w2 * Q;
        R = (R.colwise() + b2).cwiseMax(0.0);
        const Eigen::RowVectorXd o = w3.transpose() * R;
        for (Eigen::Index n = 0; n < N; ++n)
            lN[static_cast<std::size_t>(n) * M + static_cast<std::size_t>(m)] = clamp_llr(o(n) + p[lay.b3]);
    }
    return lN;
}

void stage_backward(const EqualizerStage& stage, const StageActivations& act, std::span<const double> lB,
                    std::span<const double> d_lN, std::span<double> d_params, std::span<double> d_lB)
{
    const auto& d = stage.dims;
    const NetLayout lay(d);
    const auto M = static_cast<std::size_t>(d.M);
    const auto N = act.U.cols();
    const auto in = d.input_size();
    if (d_lN.size() != static_cast<std::size_t>(N) * M || d_params.size() != d.stage_size())
        throw invalid_input("nnbp: adjoint shapes do not match the stage");
    const bool want_b = !d_lB.empty() && !lB.empty();
    MatrixXd dV;
    if (want_b)
        dV = MatrixXd::Zero(in, N);

    for (int m = 1; m < d.M; ++m) {
        const double* p = stage.net(m);
        double* g = d_params.data() + static_cast<std::size_t>(m - 1) * lay.size;
        const Map<const MatrixXd> wB(p + lay.wB, d.nq, in), w2(p + lay.w2, d.nr, d.nq);
        const Map<const VectorXd> w3(p + lay.w3, d.nr);
        const auto& Q = act.Q[static_cast<std::size_t>(m - 1)];
        const auto& R = act.R[static_cast<std::size_t>(m - 1)];

        Eigen::RowVectorXd go(N);
        const Eigen::RowVectorXd o = w3.transpose() * R;
        for (Eigen::Index n = 0; n < N; ++n) {
            const double raw = o(n) + p[lay.b3];
            // clamped outputs carry no gradient
            go(n) = std::abs(raw) > kLlrMax ? 0.0 : d_lN[static_cast<std::size_t>(n) * M + static_cast<std::size_t>(m)];
        }
        Map<VectorXd>(g + lay.w3, d.nr) += R * go.transpose();
        g[lay.b3] += go.sum();
        MatrixXd dR = w3 * go;
        dR = dR.cwiseProduct((R.array() > 0.0).cast<double>().matrix());
        Map<MatrixXd>(g + lay.w2, d.nr, d.nq) += dR * Q.transpose();
        Map<VectorXd>(g + lay.b2, d.nr) += dR.rowwise().sum();
        MatrixXd dQ = w2.transpose() * dR;
        dQ = dQ.cwiseProduct((Q.array() > 0.0).cast<double>().matrix());
        Map<MatrixXd>(g + lay.wR, d.nq, in) += dQ * act.U.transpose();
        Map<MatrixXd>(g + lay.wB, d.nq, in) += dQ * act.V.transpose();
        Map<VectorXd>(g + lay.b1, d.nq) += dQ.rowwise().sum();
        if (want_b)
            dV.noalias() += wB.transpose() * dQ;
    }
    if (!want_b)
        return;
    for (Eigen::Index n = 0; n < N; ++n)
        for (int i = -d.L; i <= d.L; ++i) {
            const auto s = static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(d.stride) * i;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(N))
                continue;
            for (int j = 0; j < d.M; ++j) {
                const Eigen::Index r = (i + d.L) * d.M + j;
                const double t = act.V(r, n);
                d_lB[static_cast<std::size_t>(s) * M + static_cast<std::size_t>(j)] += dV(r, n) * 0.5 * (1.0 - t * t);
            }
        }
}

ForwardResult full_forward(std::span<const EqualizerStage> stages, const Schedule& sched, std::span<const double> lR,
                           const ldpc::Code& code, const ForwardOptions& opt)
{
    sched.validate();
    if (stages.size() != static_cast<std::size_t>(sched.n_stages))
        throw invalid_input("nnbp: stage count does not match the schedule");
    if (lR.size() != code.n())
        throw invalid_input("nnbp: frame length does not match the code");
    ForwardResult res;
    std::vector<double> lB_prev;
    std::vector<double> out(code.n());
    const bool extrinsic = sched.feedback == Feedback::extrinsic;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        StageRecord* rec = nullptr;
        if (opt.record) {
            res.records.emplace_back();
            rec = &res.records.back();
            rec->lB_in = lB_prev;
        }
        const auto lN = stage_forward(stages[k], lR, lB_prev, rec ? &rec->act : nullptr);
        auto state = ldpc::BpState::zero(code);
        const int iters = sched.iterations_after(static_cast<int>(k));
        const bool last = k + 1 == stages.size();
        for (int it = 0; it < iters; ++it) {
            ldpc::BpStepRecord* r = nullptr;
            if (rec) {
                rec->bp.emplace_back();
                r = &rec->bp.back();
            }
            ldpc::bp_step(code, state, lN, out, r);
            ++res.iterations;
            if (last && opt.early_exit && code.syndrome(ldpc::hard_bits(out)))
                break;
        }
        res.stage_lB.push_back(out);
        lB_prev = out;
        if (extrinsic)
            for (std::size_t i = 0; i < out.size(); ++i)
                lB_prev[i] -= lN[i];
    }
    res.lB = res.stage_lB.back();
    return res;
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_loss_shapes(std::span<const double> lB, std::span<const std::uint8_t> bits, int M)
{
    if (lB.size() != bits.size() || lB.empty() || lB.size() % static_cast<std::size_t>(M) != 0)
        throw invalid_input("nnbp: loss shapes do not match");
}

}  // namespace

double loss(std::span<const double> lB, std::span<const std::uint8_t> bits, const Schedule& sched, int M)
{
    check_loss_shapes(lB, bits, M);
    const auto m_count = static_cast<std::size_t>(M);
    const std::size_t n_sym = lB.size() / m_count;
    double total = 0.0;
    for (int m = 1; m < M; ++m) {
        double acc = 0.0;
        for (std::size_t n = 0; n < n_sym; ++n) {
            const std::size_t i = n * m_count + static_cast<std::size_t>(m);
            acc += bits[i] ? softplus(lB[i]) : softplus(-lB[i]);
        }
        total += sched.lambda(m) * acc / static_cast<double>(n_sym);
    }
    return total;
}

std::vector<double> loss_gradient(std::span<const double> lB, std::span<const std::uint8_t> bits,
                                  const Schedule& sched, int M)
{
    check_loss_shapes(lB, bits, M);
    const auto m_count = static_cast<std::size_t>(M);
    const std::size_t n_sym = lB.size() / m_count;
    std::vector<double> g(lB.size(), 0.0);
    for (std::size_t n = 0; n < n_sym; ++n)
        for (int m = 1; m < M; ++m) {
            const std::size_t i = n * m_count + static_cast<std::size_t>(m);
            const double s = bits[i] ? sigmoid(lB[i]) : -sigmoid(-lB[i]);
            g[i] = sched.lambda(m) * s / static_cast<double>(n_sym);
        }
    return g;
}

namespace {

// gradients for stages [lowest, n_stages); lower stages get empty vectors
std::vector<std::vector<double>> backward_from(std::span<const EqualizerStage> stages, const Schedule& sched,
                                               const ForwardResult& fwd, std::span<const std::uint8_t> bits,
                                               const ldpc::Code& code, std::size_t lowest)
{
    if (fwd.records.size() != stages.size())
        throw invalid_input("nnbp: backward needs a recorded forward pass");
    std::vector<std::vector<double>> grads(stages.size());
    auto d_lB = loss_gradient(fwd.lB, bits, sched, stages.front().dims.M);
    const std::vector<double> zeros(code.n(), 0.0);
    const bool extrinsic = sched.feedback == Feedback::extrinsic;
    for (std::size_t k = stages.size(); k-- > lowest;) {
        const auto& rec = fwd.records[k];
        auto d_state = ldpc::BpState::zero(code);
        std::vector<double> d_lN(code.n(), 0.0);
        for (std::size_t it = rec.bp.size(); it-- > 0;)
            ldpc::bp_step_backward(code, rec.bp[it], it + 1 == rec.bp.size() ? std::span<const double>(d_lB) : zeros,
                                   d_state, d_lN);
        // the next stage saw out - lN
        if (extrinsic && k + 1 < stages.size())
            for (std::size_t i = 0; i < d_lN.size(); ++i)
                d_lN[i] -= d_lB[i];
        grads[k].assign(stages[k].dims.stage_size(), 0.0);
        std::vector<double> d_prev;
        if (k > lowest)
            d_prev.assign(code.n(), 0.0);
        stage_backward(stages[k], rec.act, rec.lB_in, d_lN, grads[k], d_prev);
        d_lB = std::move(d_prev);
    }
    return grads;
}

}  // namespace

std::vector<std::vector<double>> backward(std::span<const EqualizerStage> stages, const Schedule& sched,
                                          const ForwardResult& fwd, std::span<const std::uint8_t> bits,
                                          const ldpc::Code& code)
{
    return backward_from(stages, sched, fwd, bits, code, 0);
}

double mean_loss(std::span<const EqualizerStage> stages, const Schedule& sched, const ldpc::Code& code,
                 const std::vector<TrainingFrame>& frames)
{
    std::vector<double> per(frames.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(frames.size()); ++i) {
        const auto& f = frames[static_cast<std::size_t>(i)];
        per[static_cast<std::size_t>(i)] =
            loss(full_forward(stages, sched, f.lR, code).lB, f.bits, sched, stages.front().dims.M);
    }
    return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(frames.size());
}

TrainResult train(const StageDims& dims, const Schedule& sched, const ldpc::Code& code, const FrameProvider& provider,
                  const TrainOptions& opt, const std::function<void(const std::string&)>& log)
{
    dims.validate();
    sched.validate();
    if (opt.frames < 1 || opt.batch < 1 || opt.epochs < 0 || !(opt.learning_rate > 0.0))
        throw config_error("nnbp: frames, batch and learning rate must be positive, epochs non-negative");

    auto draw = [&](std::uint64_t first) {
        std::vector<TrainingFrame> out(opt.frames);
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(opt.frames); ++i)
            out[static_cast<std::size_t>(i)] = provider(first + static_cast<std::uint64_t>(i));
        for (const auto& f : out)
            if (f.lR.size() != code.n() || f.bits.size() != code.n())
                throw invalid_input("nnbp: training frame does not match the code");
        return out;
    };
    // the loss trace is always measured on this set
    const std::vector<TrainingFrame> frames = draw(0);

    TrainResult res;
    for (int k = 0; k < sched.n_stages; ++k) {
        Schedule sub = sched;
        sub.n_stages = k + 1;
        sub.n_res = (k + 1 == sched.n_stages && opt.full_horizon_last) ? sched.n_res : sched.n_bn;
        auto init_rng = substream(opt.seed, "nn-init", static_cast<std::uint64_t>(k));
        std::vector<EqualizerStage> stages = res.stages;
        stages.push_back(k > 0 && opt.warm_start ? stages.back() : init_stage(dims, init_rng, k == 0));
        auto& params = stages.back().params;
        const std::size_t P = params.size();
        std::vector<double> m1(P, 0.0), m2(P, 0.0);
        std::uint64_t step = 0;

        std::vector<double> trace{mean_loss(stages, sub, code, frames)};
        if (log)
            log("stage " + std::to_string(k + 1) + " initial loss " + std::to_string(trace.back()));
        int above = 0;
        std::vector<std::size_t> order(frames.size());
        for (int epoch = 0; epoch < opt.epochs; ++epoch) {
            std::vector<TrainingFrame> drawn;
            if (opt.resample && epoch > 0)
                drawn = draw(static_cast<std::uint64_t>(k * opt.epochs + epoch) * opt.frames);
            const auto& batch_frames = drawn.empty() ? frames : drawn;
            // cosine from learning_rate down to learning_rate_final over the stage's epochs
            // a stage trained through the long horizon takes proportionally smaller steps
            const double scale = static_cast<double>(sched.n_bn) / static_cast<double>(sub.n_res);
            const double lr0 = opt.learning_rate * std::min(1.0, scale);
            const double lr_final = (opt.learning_rate_final > 0.0 ? opt.learning_rate_final : opt.learning_rate) *
                                    std::min(1.0, scale);
            const double lr = lr_final + 0.5 * (lr0 - lr_final) *
                                             (1.0 + std::cos(std::numbers::pi * epoch / std::max(opt.epochs, 1)));
            std::iota(order.begin(), order.end(), 0);
            auto shuffle_rng = substream(opt.seed, "nn-shuffle", static_cast<std::uint64_t>(k * 100000 + epoch));
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (std::size_t b0 = 0; b0 < order.size(); b0 += opt.batch) {
                const std::size_t count = std::min(opt.batch, order.size() - b0);
                std::vector<std::vector<double>> slot(count);
#pragma omp parallel for schedule(dynamic, 1)
                for (std::int64_t j = 0; j < static_cast<std::int64_t>(count); ++j) {
                    const auto& f = batch_frames[order[b0 + static_cast<std::size_t>(j)]];
                    const auto fwd = full_forward(stages, sub, f.lR, code, {true, false});
                    slot[static_cast<std::size_t>(j)] =
                        std::move(backward_from(stages, sub, fwd, f.bits, code, static_cast<std::size_t>(k))[k]);
                }
                ++step;
                const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
                for (std::size_t p = 0; p < P; ++p) {
                    double g = 0.0;
                    for (const auto& s : slot)
                        g += s[p];
                    g /= static_cast<double>(count);
                    m1[p] = opt.beta1 * m1[p] + (1.0 - opt.beta1) * g;
                    m2[p] = opt.beta2 * m2[p] + (1.0 - opt.beta2) * g * g;
                    params[p] -= lr * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + opt.eps);
                }
            }
            const double l = mean_loss(stages, sub, code, frames);
            trace.push_back(l);
            if (log)
                log("stage " + std::to_string(k + 1) + " epoch " + std::to_string(epoch + 1) + " loss " +
                    std::to_string(l));
            if (!std::isfinite(l))
                throw numerical_error("nnbp: training loss is not finite at stage " + std::to_string(k + 1));
            above = l > 10.0 * trace.front() ? above + 1 : 0;
            if (above >= 3)
                throw numerical_error("nnbp: training diverged at stage " + std::to_string(k + 1));
        }
        res.stages = std::move(stages);
        res.loss_trace.push_back(std::move(trace));
    }
    return res;
}

void write_weights(std::span<const EqualizerStage> stages, const Schedule& sched, const std::string& path)
{
    if (stages.empty() || stages.size() != static_cast<std::size_t>(sched.n_stages))
        throw invalid_input("nnbp: stage count does not match the schedule");
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot write weight file '" + path + "'");
    const auto& d = stages.front().dims;
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "nnbp " << d.L << ' ' << d.M << ' ' << d.nq << ' ' << d.nr << ' ' << d.stride << ' ' << sched.n_stages << ' '
        << sched.n_bn << ' ' << sched.n_res << ' ' << num(sched.lambda1) << ' ' << num(sched.lambda2) << ' '
        << (sched.feedback == Feedback::extrinsic ? "extrinsic" : "posterior") << '\n';
    const NetLayout lay(d);
    for (const auto& s : stages) {
        if (!(s.dims == d))
            throw invalid_input("nnbp: stages have different dimensions");
        for (std::size_t i = 0; i < s.params.size(); ++i)
            out << num(s.params[i]) << ((i + 1) % lay.size == 0 ? '\n' : ' ');
    }
    if (!out)
        throw config_error("failed writing weight file '" + path + "'");
}

Weights read_weights(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot read weight file '" + path + "'");
    std::string tag, fb;
    StageDims d;
    Weights w;
    in >> tag >> d.L >> d.M >> d.nq >> d.nr >> d.stride >> w.schedule.n_stages >> w.schedule.n_bn >> w.schedule.n_res >>
        w.schedule.lambda1 >> w.schedule.lambda2 >> fb;
    if (!in || tag != "nnbp" || (fb != "posterior" && fb != "extrinsic"))
        throw config_error("weight file '" + path + "': malformed header");
    w.schedule.feedback = fb == "extrinsic" ? Feedback::extrinsic : Feedback::posterior;
    d.validate();
    w.schedule.validate();
    for (int k = 0; k < w.schedule.n_stages; ++k) {
        EqualizerStage s{d, std::vector<double>(d.stage_size())};
        for (auto& v : s.params)
            if (!(in >> v))
                throw config_error("weight file '" + path + "': too few values");
        w.stages.push_back(std::move(s));
    }
    double extra;
    if (in >> extra)
        throw config_error("weight file '" + path + "': trailing values");
    return w;
}

}  // namespace nleq::nnbp
