// Command-line front end. Exit codes: 0 success, 2 configuration error, 3 numerical or
// convergence error, 4 required SNR not bracketed by the grid.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nleq/harness/experiments.hpp"
#include "nleq/harness/svg.hpp"

using namespace nleq;
using namespace nleq::harness;

namespace {

const auto t_start = std::chrono::steady_clock::now();

void log_line(const std::string& msg)
{
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::fprintf(stderr, "[%8.1fs] %s\n", t, msg.c_str());
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "experiment config file")->required();
    app->add_option("--seed", c.seed, "master seed (overrides [run] seed)");
    app->add_option("--out", c.out, "output directory (overrides [run] output_dir)");
}

ExperimentConfig load(const Common& c)
{
    auto cfg = load_config(c.config);
    if (c.seed)
        cfg.seed = *c.seed;
    if (!c.out.empty())
        cfg.output_dir = c.out;
    std::filesystem::create_directories(cfg.output_dir);
    return cfg;
}

void write_file(const ExperimentConfig& cfg, const std::string& name, const std::string& content)
{
    const auto path = (std::filesystem::path(cfg.output_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out)
        throw config_error("cannot write '" + path + "'");
    log_line("wrote " + path);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name)
{
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

std::string snr_name(double snr)
{
    if (std::isinf(snr))
        return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", snr);
    return buf;
}

std::shared_ptr<const volterra::VolterraModel> volterra_model(const Experiment& exp, const std::string& path)
{
    if (!path.empty())
        return std::make_shared<const volterra::VolterraModel>(volterra::read_model(path));
    return std::make_shared<const volterra::VolterraModel>(exp.fit_volterra(exp.config().volterra_train_snr_db));
}

std::string loss_csv(const nnbp::TrainResult& r)
{
    std::string s = "stage,epoch,loss\n";
    char buf[64];
    for (std::size_t k = 0; k < r.loss_trace.size(); ++k)
        for (std::size_t e = 0; e < r.loss_trace[k].size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.8g\n", k + 1, e, r.loss_trace[k][e]);
            s += buf;
        }
    return s;
}

std::shared_ptr<const nnbp::Weights> nn_weights(const Experiment& exp, const std::string& path, int stages,
                                                std::optional<double>& train_snr)
{
    if (!path.empty())
        return std::make_shared<const nnbp::Weights>(nnbp::read_weights(path));
    if (!train_snr)
        train_snr = nn_training_snr(exp);
    auto r = train_nn(exp, stages, *train_snr);
    auto w = std::make_shared<nnbp::Weights>();
    w->stages = r.stages;
    w->schedule = exp.config().nn_schedule;
    w->schedule.n_stages = stages;
    w->schedule.n_res = exp.config().nn_schedule.total_iterations() - (stages - 1) * w->schedule.n_bn;
    const auto name = "nnbp_" + std::to_string(stages) + "stage.txt";
    nnbp::write_weights(w->stages, w->schedule, out_path(exp.config(), name));
    write_file(exp.config(), "nn_loss_" + std::to_string(stages) + "stage.csv", loss_csv(r));
    return w;
}

int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config:
    case ErrorKind::invalid_input: return 2;
    case ErrorKind::numerical: return 3;
    case ErrorKind::range: return 4;
    }
    return 3;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Nonlinear equalization link simulator"};
    app.require_subcommand(1);

    Common c_cal, c_fit, c_nn, c_wf, c_sweep, c_pen, c_cmp;
    auto* cal = app.add_subcommand("calibrate", "bisect the drive level A onto the target nonlinearity ratio");
    add_common(cal, c_cal);

    auto* fit = app.add_subcommand("fit-volterra", "fit a Volterra equalizer and write its weights");
    add_common(fit, c_fit);
    std::optional<double> fit_snr;
    fit->add_option("--train-snr", fit_snr, "training SNR in dB (default [volterra] train_snr_db)");

    auto* tnn = app.add_subcommand("train-nn", "train NN-BP stages and write the weights");
    add_common(tnn, c_nn);
    std::optional<int> nn_stages;
    std::optional<double> nn_snr;
    tnn->add_option("--stages", nn_stages, "number of NN stages (default [nn] n_stages)");
    tnn->add_option("--train-snr", nn_snr, "training SNR in dB (default [nn] train_snr_db)");

    auto* wf = app.add_subcommand("waterfall", "BER curve of the configured equalizer");
    add_common(wf, c_wf);

    auto* sw = app.add_subcommand("sweep-train-snr", "NE / NL penalties and noise figure over training SNRs");
    add_common(sw, c_sweep);

    auto* pen = app.add_subcommand("penalty", "NE / NL penalty split at [volterra] train_snr_db");
    add_common(pen, c_pen);

    auto* cmp = app.add_subcommand("compare", "final comparison of all equalizers");
    add_common(cmp, c_cmp);
    std::string cmp_vlt, cmp_nn1, cmp_nn3;
    cmp->add_option("--volterra", cmp_vlt, "Volterra weights at the optimal training SNR");
    cmp->add_option("--nn1", cmp_nn1, "1-stage NN weights");
    cmp->add_option("--nn3", cmp_nn3, "multi-stage NN-BP weights");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (cal->parsed()) {
            const Experiment exp(load(c_cal), log_line);
            const auto r = calibrate(exp);
            write_file(exp.config(), "calibration.ini", calibration_file(r));
            std::printf("A = %.6f ratio = %.5f refit = %.5f %s\n", r.amplitude, r.ratio, r.refit_ratio,
                        r.in_band ? "in band" : "OUT OF BAND");
            return r.in_band ? 0 : 3;
        }
        if (fit->parsed()) {
            const Experiment exp(load(c_fit), log_line);
            const double snr = fit_snr.value_or(exp.config().volterra_train_snr_db);
            const auto m = exp.fit_volterra(snr);
            const auto path = out_path(exp.config(), "volterra_" + snr_name(snr) + ".txt");
            volterra::write_model(m, path);
            const auto mom = noisefig::estimate_moments(exp.link(snr), m.memory(), exp.config().moment_blocks, 2000,
                                                        exp.seed("moments"));
            std::printf("wrote %s, ratio %.5f\n", path.c_str(), volterra::nonlinearity_ratio(m, mom.ew2));
            return 0;
        }
        if (tnn->parsed()) {
            const Experiment exp(load(c_nn), log_line);
            const int stages = nn_stages.value_or(exp.config().nn_schedule.n_stages);
            nn_weights(exp, "", stages, nn_snr);
            return 0;
        }
        if (wf->parsed()) {
            const Experiment exp(load(c_wf), log_line);
            const auto& cfg = exp.config();
            BerCurve curve;
            switch (cfg.equalizer) {
            case EqualizerKind::none:
                curve = exp.waterfall("no-equalizer", exp.linear_only());
                break;
            case EqualizerKind::volterra:
                curve = exp.waterfall("volterra", exp.volterra(volterra_model(exp, cfg.volterra_model), cfg.variant));
                break;
            case EqualizerKind::nn_bp:
                if (cfg.nn_weights.empty())
                    throw config_error("[equalizer] nn_weights is required for nn_bp");
                curve = exp.waterfall("nn-bp", exp.nn_bp(std::make_shared<const nnbp::Weights>(
                                                   nnbp::read_weights(cfg.nn_weights))));
                break;
            }
            write_file(cfg, "waterfall.csv", curves_csv({curve}));
            write_file(cfg, "waterfall.svg", ber_chart_svg("Waterfall", {curve}));
            return 0;
        }
        if (sw->parsed() || pen->parsed()) {
            const Experiment exp(load(sw->parsed() ? c_sweep : c_pen), log_line);
            const auto& cfg = exp.config();
            const bool sweep = sw->parsed();
            const auto grid = sweep ? cfg.train_snr_grid : std::vector<double>{cfg.volterra_train_snr_db};
            const auto r = training_snr_sweep(exp, grid);
            const std::string stem = sweep ? "sweep" : "penalty";
            write_file(cfg, stem + ".csv", sweep_csv(r));
            write_file(cfg, stem + "_curves.csv", curves_csv(r.curves));
            write_file(cfg, stem + "_curves.svg", ber_chart_svg("Waterfalls", r.curves));
            if (sweep) {
                Series ne{"NE-penalty", {}, {}}, nl{"NL-penalty", {}, {}}, tot{"total", {}, {}}, nf{"noise figure", {}, {}},
                    nfe{"noise figure (Monte-Carlo)", {}, {}};
                for (const auto& row : r.rows) {
                    const double x = row.penalty.train_snr_db;
                    for (auto* s : {&ne, &nl, &tot, &nf, &nfe})
                        s->x.push_back(x);
                    ne.y.push_back(row.penalty.ne_penalty_db);
                    nl.y.push_back(row.penalty.nl_penalty_db);
                    tot.y.push_back(row.penalty.total_db);
                    nf.y.push_back(row.penalty.nf_db);
                    nfe.y.push_back(row.nf_empirical_db);
                }
                write_file(cfg, "sweep.svg",
                           line_chart_svg("Penalties vs training SNR", "training SNR [dB]", "penalty [dB]",
                                          {ne, nl, tot, nf, nfe}, false));
            }
            std::cout << sweep_csv(r);
            return 0;
        }
        if (cmp->parsed()) {
            const Experiment exp(load(c_cmp), log_line);
            ComparisonModels m;
            m.vlt_optimal = volterra_model(exp, cmp_vlt.empty() ? exp.config().volterra_model : cmp_vlt);
            std::optional<double> snr;
            m.nn_three = nn_weights(exp, cmp_nn3.empty() ? exp.config().nn_weights : cmp_nn3,
                                    exp.config().nn_schedule.n_stages, snr);
            if (cmp_nn1.empty() && !exp.config().nn_train.full_horizon_last)
                m.nn_one = std::make_shared<const nnbp::Weights>(leading_stages(exp, *m.nn_three, 1));
            else
                m.nn_one = nn_weights(exp, cmp_nn1, 1, snr);
            const auto c = final_comparison(exp, m);
            write_file(exp.config(), "compare.csv", curves_csv(c.curves));
            write_file(exp.config(), "compare.svg", ber_chart_svg("Final comparison", c.curves));
            const auto report = comparison_report(c);
            write_file(exp.config(), "compare_report.txt", report);
            std::cout << report;
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
