#include "nleq/harness/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nleq/common.hpp"

namespace nleq::harness {

namespace {

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string snr_tag(double snr) { return std::isinf(snr) ? "inf" : fmt("%g", snr); }

double required_or_nan(const BerCurve& c, double target)
{
    try {
        return required_snr(c, target);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::range)
            throw;
        return std::nan("");
    }
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg, Log log) : cfg_(std::move(cfg)), log_(std::move(log))
{
    cfg_.validate();
    if (cfg_.code_path.empty())
        throw config_error("[code] path is required");
    try {
        code_ = std::make_shared<const ldpc::Code>(ldpc::read_alist_file(cfg_.code_path));
    } catch (const Error& e) {
        throw config_error(e.what());
    }
    if (code_->n() % 6 != 0)
        throw config_error("code length must be a multiple of 6 (two streams of 3-bit symbols)");
}

void Experiment::log(const std::string& msg) const
{
    if (log_)
        log_(msg);
}

chansim::Link Experiment::link(double snr_db, double amplitude) const
{
    auto c = cfg_.channel;
    c.nl_amplitude = amplitude;
    c.snr_db = snr_db;
    return chansim::Link(c, chansim::default_guard(c, cfg_.volterra_train.memory));
}

WaterfallOptions Experiment::waterfall_options() const
{
    WaterfallOptions o;
    o.frames_per_point = cfg_.frames_per_point;
    o.min_errors = cfg_.min_errors;
    o.batch = cfg_.batch;
    o.seed = cfg_.seed;
    return o;
}

Decoder Experiment::bp() const { return bp_decoder(code_, cfg_.bp_iterations); }

std::uint64_t Experiment::seed(const char* purpose) const { return mix64(cfg_.seed ^ tag_hash(purpose)); }

SystemFactory Experiment::no_nonlinearity() const
{
    return [this](double snr) {
        System s{link(snr, kInf)};
        s.rho = calibrate_rho(s.link, s.variant, s.eq, seed("rho"));
        s.decoder = bp();
        return s;
    };
}

SystemFactory Experiment::linear_only() const
{
    return [this](double snr) {
        System s{link(snr)};
        s.rho = calibrate_rho(s.link, s.variant, s.eq, seed("rho"));
        s.decoder = bp();
        return s;
    };
}

SystemFactory Experiment::volterra(std::shared_ptr<const volterra::VolterraModel> model, chansim::Variant v) const
{
    auto base = std::make_shared<const chansim::Link>(link(model->train_snr_db));
    return [this, model, v, base](double snr) {
        System s{base->at_snr(snr)};
        s.variant = v;
        s.eq = volterra::as_equalizer(*model);
        s.rho = calibrate_rho(s.link, v, s.eq, seed("rho"));
        s.decoder = bp();
        return s;
    };
}

SystemFactory Experiment::volterra_per_snr() const
{
    return [this](double snr) {
        const auto model = fit_volterra(snr);
        System s{link(snr)};
        s.eq = volterra::as_equalizer(model);
        s.rho = calibrate_rho(s.link, s.variant, s.eq, seed("rho"));
        s.decoder = bp();
        return s;
    };
}

SystemFactory Experiment::nn_bp(std::shared_ptr<const nnbp::Weights> weights) const
{
    auto code = code_;
    return [this, weights, code](double snr) {
        System s{link(snr)};
        s.rho = calibrate_rho(s.link, s.variant, s.eq, seed("rho"));
        s.decoder = [weights, code](std::span<const double> lr) {
            return nnbp::full_forward(weights->stages, weights->schedule, lr, *code, {false, true}).lB;
        };
        return s;
    };
}

volterra::VolterraModel Experiment::fit_volterra(double train_snr_db) const
{
    auto o = cfg_.volterra_train;
    o.seed = seed("volterra");
    auto c = cfg_.channel;
    return volterra::train_at_snr(c, train_snr_db, o);
}

BerCurve Experiment::waterfall(const std::string& label, const SystemFactory& make) const
{
    if (cfg_.snr_grid.empty())
        throw config_error("[waterfall] snr_grid is required");
    auto c = run_waterfall(label, make, *code_, cfg_.snr_grid, waterfall_options());
    double req = required_or_nan(c, cfg_.target_ber);
    log(label + ": required SNR " + (std::isnan(req) ? std::string("not bracketed") : fmt("%.3f dB", req)));
    return c;
}

double nonlinearity_ratio_at(const Experiment& exp, double amplitude, std::uint64_t seed)
{
    const auto& cfg = exp.config();
    auto c = cfg.channel;
    c.nl_amplitude = amplitude;
    auto o = cfg.volterra_train;
    o.seed = seed;
    const auto model = volterra::train_at_snr(c, cfg.calib_train_snr_db, o);
    const auto mom = noisefig::estimate_moments(exp.link(cfg.calib_train_snr_db, amplitude), o.memory,
                                                cfg.moment_blocks, 2000, seed);
    return volterra::nonlinearity_ratio(model, mom.ew2);
}

CalibrationResult calibrate(const Experiment& exp)
{
    const auto& cfg = exp.config();
    CalibrationResult r;
    const auto s = exp.seed("calibrate");
    auto eval = [&](double a) {
        const double v = nonlinearity_ratio_at(exp, a, s);
        r.steps.push_back({a, v});
        exp.log("calibrate: A = " + fmt("%.5f", a) + " ratio = " + fmt("%.5f", v));
        return v;
    };
    double lo = cfg.calib_a_low, hi = cfg.calib_a_high;
    const double r_lo = eval(lo), r_hi = eval(hi);
    if (!(r_lo >= cfg.calib_target && r_hi <= cfg.calib_target))
        throw range_error("calibrate: ratio is " + fmt("%.4f", r_lo) + " at A = " + fmt("%g", lo) + " and " +
                          fmt("%.4f", r_hi) + " at A = " + fmt("%g", hi) +
                          "; the range does not bracket the target, adjust a_low / a_high");
    double mid = lo, v = r_lo;
    for (int it = 0; it < 40; ++it) {
        mid = std::sqrt(lo * hi);
        v = eval(mid);
        if (std::abs(v - cfg.calib_target) < cfg.calib_tolerance || hi / lo < 1.0 + 1e-5)
            break;
        (v > cfg.calib_target ? lo : hi) = mid;
    }
    r.amplitude = mid;
    r.ratio = v;
    r.refit_ratio = nonlinearity_ratio_at(exp, mid, exp.seed("calibrate-refit"));
    r.in_band = r.ratio >= cfg.calib_low && r.ratio <= cfg.calib_high && r.refit_ratio >= cfg.calib_low &&
                r.refit_ratio <= cfg.calib_high;
    return r;
}

std::string calibration_file(const CalibrationResult& r)
{
    std::ostringstream out;
    out << "# ratio E[w^2]|h3|/|h1| = " << fmt("%.5f", r.ratio) << ", fresh-seed refit " << fmt("%.5f", r.refit_ratio)
        << ", in band: " << (r.in_band ? "yes" : "no") << "\n[channel]\nnl_amplitude = " << fmt("%.6f", r.amplitude)
        << "\n";
    return out.str();
}

std::pair<double, double> noise_figures_db(const Experiment& exp, const volterra::VolterraModel& model)
{
    const auto& cfg = exp.config();
    const auto op = exp.link(model.train_snr_db).at_snr(cfg.nf_eval_snr_db);
    const auto mom = noisefig::estimate_moments(op, model.memory(), cfg.moment_blocks, 2000, exp.seed("moments"));
    const double f = noisefig::noise_figure(model, mom);
    const auto emp = noisefig::empirical_output_snr(op, volterra::as_equalizer(model), cfg.nf_blocks, 2000,
                                                    exp.seed("nf"));
    return {noisefig::to_db(f), noisefig::to_db(emp.noise_figure())};
}

SweepResult training_snr_sweep(const Experiment& exp, const std::vector<double>& train_grid)
{
    if (train_grid.empty())
        throw config_error("[sweep] train_snr_grid is required");
    const auto& cfg = exp.config();
    SweepResult res;
    res.curves.push_back(exp.waterfall("no-NL", exp.no_nonlinearity()));
    res.req_baseline_db = required_snr(res.curves.back(), cfg.target_ber);
    for (double ts : train_grid) {
        auto model = std::make_shared<const volterra::VolterraModel>(exp.fit_volterra(ts));
        const auto tag = snr_tag(ts);
        res.curves.push_back(exp.waterfall("vlt-c@" + tag, exp.volterra(model, chansim::Variant::c)));
        const double rc = required_snr(res.curves.back(), cfg.target_ber);
        res.curves.push_back(exp.waterfall("vlt-a@" + tag, exp.volterra(model, chansim::Variant::a)));
        const double ra = required_snr(res.curves.back(), cfg.target_ber);
        const auto [nf, nf_emp] = noise_figures_db(exp, *model);
        SweepRow row;
        row.penalty = noisefig::penalty_report(ts, res.req_baseline_db, rc, ra, nf);
        row.nf_empirical_db = nf_emp;
        const auto mom = noisefig::estimate_moments(exp.link(ts), model->memory(), cfg.moment_blocks, 2000,
                                                    exp.seed("moments"));
        row.ratio = volterra::nonlinearity_ratio(*model, mom.ew2);
        row.req_a_db = ra;
        row.req_c_db = rc;
        exp.log("train " + tag + " dB: NE " + fmt("%.3f", row.penalty.ne_penalty_db) + " NL " +
                fmt("%.3f", row.penalty.nl_penalty_db) + " NF " + fmt("%.3f", nf) + " (empirical " +
                fmt("%.3f", nf_emp) + ")");
        res.rows.push_back(row);
    }
    return res;
}

std::string sweep_csv(const SweepResult& r)
{
    std::ostringstream out;
    out << "train_snr,ne_db,nl_db,total_db,nf_db,nf_empirical_db,ratio,req_baseline_db,req_c_db,req_a_db\n";
    for (const auto& row : r.rows) {
        const auto& p = row.penalty;
        out << snr_tag(p.train_snr_db) << ',' << fmt("%.6g", p.ne_penalty_db) << ',' << fmt("%.6g", p.nl_penalty_db)
            << ',' << fmt("%.6g", p.total_db) << ',' << fmt("%.6g", p.nf_db) << ',' << fmt("%.6g", row.nf_empirical_db)
            << ',' << fmt("%.6g", row.ratio) << ',' << fmt("%.6g", r.req_baseline_db) << ','
            << fmt("%.6g", row.req_c_db) << ',' << fmt("%.6g", row.req_a_db) << '\n';
    }
    return out.str();
}

nnbp::TrainResult train_nn(const Experiment& exp, int n_stages, double train_snr_db)
{
    const auto& cfg = exp.config();
    auto sched = cfg.nn_schedule;
    const int total = sched.total_iterations();
    sched.n_stages = n_stages;
    sched.n_res = total - (n_stages - 1) * sched.n_bn;
    if (sched.n_res < 1)
        throw config_error("nn: iteration budget too small for " + std::to_string(n_stages) + " stages");
    const auto code = exp.code();
    System sys{exp.link(train_snr_db)};
    sys.rho = calibrate_rho(sys.link, sys.variant, sys.eq, exp.seed("rho"));
    const auto frame_seed = exp.seed("nn-frames");
    nnbp::FrameProvider provider = [&](std::uint64_t i) {
        auto f = transmit_frame(sys, *code, frame_seed, i);
        return nnbp::TrainingFrame{std::move(f.llr), std::move(f.codeword)};
    };
    auto opt = cfg.nn_train;
    opt.seed = exp.seed("nn-train");
    exp.log("nn: training " + std::to_string(n_stages) + " stage(s) at " + fmt("%.3f", train_snr_db) + " dB");
    auto res = nnbp::train(cfg.nn_dims, sched, *code, provider, opt, [&](const std::string& m) { exp.log("nn: " + m); });
    return res;
}

nnbp::Weights leading_stages(const Experiment& exp, const nnbp::Weights& w, int k)
{
    if (k < 1 || static_cast<std::size_t>(k) > w.stages.size())
        throw config_error("nn: cannot take " + std::to_string(k) + " of " + std::to_string(w.stages.size()) + " stages");
    nnbp::Weights out;
    out.stages.assign(w.stages.begin(), w.stages.begin() + k);
    out.schedule = w.schedule;
    out.schedule.n_stages = k;
    out.schedule.n_res = exp.config().nn_schedule.total_iterations() - (k - 1) * out.schedule.n_bn;
    return out;
}

double nn_training_snr(const Experiment& exp)
{
    const auto& cfg = exp.config();
    if (!cfg.nn_train_snr_auto)
        return cfg.nn_train_snr_db;
    auto model = std::make_shared<const volterra::VolterraModel>(exp.fit_volterra(cfg.volterra_train_snr_db));
    const auto c = exp.waterfall("vlt-optimal", exp.volterra(model, chansim::Variant::a));
    return required_snr(c, cfg.target_ber) - 0.5;
}

Comparison final_comparison(const Experiment& exp, const ComparisonModels& m, double slack_db)
{
    const auto& cfg = exp.config();
    Comparison c;
    c.curves.push_back(exp.waterfall("no-NL", exp.no_nonlinearity()));
    c.curves.push_back(exp.waterfall("no-equalizer", exp.linear_only()));
    c.curves.push_back(exp.waterfall("vlt-per-snr", exp.volterra_per_snr()));
    c.curves.push_back(exp.waterfall("vlt-optimal", exp.volterra(m.vlt_optimal, chansim::Variant::a)));
    c.curves.push_back(exp.waterfall("nn-1stage", exp.nn_bp(m.nn_one)));
    c.curves.push_back(exp.waterfall("nn-bp-3stage", exp.nn_bp(m.nn_three)));
    for (const auto& curve : c.curves)
        c.required_db.push_back(required_or_nan(curve, cfg.target_ber));

    const auto& r = c.required_db;
    c.ordering_ok = true;
    const int order[] = {0, 5, 4, 3, 2, 1};
    for (int i = 0; i + 1 < 6; ++i) {
        const int a = order[i], b = order[i + 1];
        const bool ok = r[a] <= r[b] + slack_db;
        c.ordering_ok = c.ordering_ok && ok;
        c.checks.push_back(std::string(ok ? "PASS " : "FAIL ") + c.curves[a].label + " <= " + c.curves[b].label +
                           " (" + fmt("%.3f", r[a]) + " vs " + fmt("%.3f", r[b]) + " dB)");
    }
    c.checks.push_back("gain nn-bp-3stage over vlt-optimal " + fmt("%.3f", r[3] - r[5]) + " dB");
    c.checks.push_back("gain nn-bp-3stage over no-equalizer " + fmt("%.3f", r[1] - r[5]) + " dB");
    c.checks.push_back("gain vlt-optimal over no-equalizer " + fmt("%.3f", r[1] - r[3]) + " dB");
    return c;
}

std::string comparison_report(const Comparison& c)
{
    std::ostringstream out;
    out << "system,required_snr_db\n";
    for (std::size_t i = 0; i < c.curves.size(); ++i)
        out << c.curves[i].label << ',' << fmt("%.4f", c.required_db[i]) << '\n';
    out << '\n';
    for (const auto& line : c.checks)
        out << line << '\n';
    return out.str();
}

}  // namespace nleq::harness
