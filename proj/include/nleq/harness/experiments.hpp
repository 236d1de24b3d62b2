#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nleq/harness/config.hpp"
#include "nleq/harness/waterfall.hpp"
#include "nleq/nnbp/nnbp.hpp"
#include "nleq/noisefig/noisefig.hpp"
#include "nleq/volterra/volterra.hpp"

namespace nleq::harness {

using Log = std::function<void(const std::string&)>;

/// A loaded configuration plus the code it refers to.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg, Log log = {});

    const ExperimentConfig& config() const noexcept { return cfg_; }
    std::shared_ptr<const ldpc::Code> code() const noexcept { return code_; }
    void log(const std::string& msg) const;

    /// Link with the configured channel at `snr_db`; `amplitude` overrides the drive level.
    chansim::Link link(double snr_db, double amplitude) const;
    chansim::Link link(double snr_db) const { return link(snr_db, cfg_.channel.nl_amplitude); }
    WaterfallOptions waterfall_options() const;
    Decoder bp() const;
    std::uint64_t seed(const char* purpose) const;

    // systems as a function of the operating SNR
    SystemFactory no_nonlinearity() const;
    SystemFactory linear_only() const;
    /// FIR adapted at the model's training SNR and kept; the model is applied under `v`.
    SystemFactory volterra(std::shared_ptr<const volterra::VolterraModel> model, chansim::Variant v) const;
    /// Volterra refitted at every operating SNR.
    SystemFactory volterra_per_snr() const;
    SystemFactory nn_bp(std::shared_ptr<const nnbp::Weights> weights) const;

    volterra::VolterraModel fit_volterra(double train_snr_db) const;
    BerCurve waterfall(const std::string& label, const SystemFactory& make) const;

private:
    ExperimentConfig cfg_;
    std::shared_ptr<const ldpc::Code> code_;
    Log log_;
};

struct CalibrationStep {
    double amplitude, ratio;
};

struct CalibrationResult {
    double amplitude = 0.0;
    double ratio = 0.0;        // at the returned amplitude
    double refit_ratio = 0.0;  // fresh training seed, same amplitude
    bool in_band = false;
    std::vector<CalibrationStep> steps;
};

/// E[w^2] |h3| / |h1| of a model fitted at the calibration training SNR with drive level A.
double nonlinearity_ratio_at(const Experiment& exp, double amplitude, std::uint64_t seed);

/// Bisection on log A until the ratio is within tolerance of the target. Throws range_error
/// when [a_low, a_high] does not bracket the target.
CalibrationResult calibrate(const Experiment& exp);
std::string calibration_file(const CalibrationResult& r);

struct SweepRow {
    noisefig::PenaltyReport penalty;
    double nf_empirical_db = 0.0;
    double ratio = 0.0;
    double req_a_db = 0.0, req_c_db = 0.0;
};

struct SweepResult {
    double req_baseline_db = 0.0;
    std::vector<SweepRow> rows;
    std::vector<BerCurve> curves;
};

/// Analytic (moment-based) and paired-pass noise figures of `model` at the sweep's evaluation SNR.
std::pair<double, double> noise_figures_db(const Experiment& exp, const volterra::VolterraModel& model);

/// Penalty decomposition at every training SNR of the sweep grid.
SweepResult training_snr_sweep(const Experiment& exp, const std::vector<double>& train_grid);

/// CSV: train_snr,ne_db,nl_db,total_db,nf_db,nf_empirical_db,ratio,req_baseline_db,req_c_db,req_a_db
std::string sweep_csv(const SweepResult& r);

nnbp::TrainResult train_nn(const Experiment& exp, int n_stages, double train_snr_db);

/// First k stages of `w` with the config's iteration budget; the last kept stage runs the remainder.
/// Greedy training makes this the same network train_nn(exp, k, .) produces, unless the last stage
/// is trained through the full horizon.
nnbp::Weights leading_stages(const Experiment& exp, const nnbp::Weights& w, int k);

/// Training SNR from the config, or the "auto" rule.
double nn_training_snr(const Experiment& exp);

struct Comparison {
    std::vector<BerCurve> curves;       // no-NL, no equalizer, VLT per-SNR, VLT optimal, NN 1-stage, NN-BP
    std::vector<double> required_db;    // same order; NaN where the curve does not bracket the target
    std::vector<std::string> checks;    // PASS/FAIL lines for the ordering and gains
    bool ordering_ok = false;
};

struct ComparisonModels {
    std::shared_ptr<const volterra::VolterraModel> vlt_optimal;
    std::shared_ptr<const nnbp::Weights> nn_one, nn_three;
};

Comparison final_comparison(const Experiment& exp, const ComparisonModels& models, double slack_db = 0.05);
std::string comparison_report(const Comparison& c);

}  // namespace nleq::harness
